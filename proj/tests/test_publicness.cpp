// Compile-level check that the verifier side never reaches secret state:
// this TU pulls in the auditor, the extractor and the server, and fails to
// build if any of them (transitively) includes the secret-state header.

#include <catch2/catch_amalgamated.hpp>

#include "dpor/auditor.hpp"
#include "dpor/extractor.hpp"
#include "dpor/server.hpp"

#ifdef DPOR_SECRET_INCLUDED
#error "verifier-side headers must not reach SecretState"
#endif

using namespace dpor;

TEST_CASE("verify_proof runs from public material alone") {
    // parameters arrive as text, the way a TPA would receive them
    std::stringstream params_text(
        "lambda=8\nlambda_p=7\nlambda_q=5\np=67\nq=11\nm=1\nn=1\nomega=a\n"
        "fid=00000000000000000000000000000000\npsk=" +
        std::string(64, '0') + "\nsig_scheme=ed25519\ngenerators=11,12,13\n");
    SystemParams P = read_params(params_text);
    Challenge q;
    q.W = 0;
    AuditProof pr;
    pr.W = 0;
    AuditOutcome out = verify_proof(P, q, pr);
    CHECK(out.ok);
    CHECK(out.vacuous);
}
