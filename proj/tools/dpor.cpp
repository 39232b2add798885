// Command-line surface for the storage scheme: key generation, the client
// protocol (init/read/write), public audits, extraction, adversary staging,
// a TCP server, and a transfer-cost benchmark.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dpor/bench.hpp"

using namespace dpor;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config;
    std::string profile = "toy";
    uint64_t n = 16;
    size_t m = 0;  // 0 = profile default
    unsigned per_level = 8;
    uint64_t seed = 0;
    std::string store;       // snapshot file (loopback transport)
    std::string server;      // host:port (TCP transport)
};

void load_config(CommonOpts& o) {
    if (o.config.empty()) return;
    std::ifstream in(o.config);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + o.config);
    auto kv = parse_kv(in);
    auto get = [&](const char* k) { return kv.count(k) ? std::optional(kv.at(k)) : std::nullopt; };
    if (auto v = get("profile")) o.profile = *v;
    if (auto v = get("n")) o.n = std::stoull(*v);
    if (auto v = get("m")) o.m = std::stoul(*v);
    if (auto v = get("per_level")) o.per_level = std::stoul(*v);
    if (auto v = get("seed")) o.seed = std::stoull(*v);
}

Rng make_rng(const CommonOpts& o) { return o.seed ? Rng(o.seed) : Rng::from_entropy(); }

/// Snapshot-backed loopback or TCP, chosen by --store / --server.
struct Session {
    std::unique_ptr<PorServer> local;
    std::unique_ptr<Link> link;
    ByteMeter meter;
    std::unique_ptr<Endpoint> ep;
    std::string store_path;

    static Session open(const CommonOpts& o, bool fresh_ok = false) {
        Session s;
        if (!o.server.empty()) {
            auto colon = o.server.rfind(':');
            if (colon == std::string::npos)
                throw CLI::ValidationError("--server", "expected host:port");
            s.link = std::make_unique<TcpLink>(o.server.substr(0, colon),
                                               static_cast<uint16_t>(std::stoul(o.server.substr(colon + 1))));
        } else if (!o.store.empty()) {
            s.store_path = o.store;
            s.local = std::make_unique<PorServer>(o.seed + 0x5eed);
            if (std::filesystem::exists(o.store)) {
                std::ifstream in(o.store, std::ios::binary);
                *s.local = PorServer::load(in);
            } else if (!fresh_ok) {
                throw CLI::ValidationError("--store", "no snapshot at " + o.store);
            }
            PorServer* srv = s.local.get();
            s.link = std::make_unique<LoopbackLink>([srv](const Frame& f) { return srv->handle_frame(f); });
        } else {
            throw CLI::ValidationError("transport", "one of --store or --server is required");
        }
        s.ep = std::make_unique<Endpoint>(*s.link, s.meter);
        return s;
    }

    void persist() {
        if (local && !store_path.empty()) {
            std::ofstream out(store_path, std::ios::binary | std::ios::trunc);
            local->save(out);
        }
    }
};

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return Bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const Bytes& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

ClientState load_client(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return PorClient::load_state(in);
}

void save_client(const std::string& path, const PorClient& client) {
    std::ofstream out(path, std::ios::trunc);
    client.save(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"publicly verifiable dynamic storage auditing"};
    app.require_subcommand(1);
    app.fallthrough();  // shared options may follow the subcommand name
    CommonOpts o;
    app.add_option("--config", o.config, "key=value config file")->envname("DPOR_CONFIG");
    app.add_option("--params", o.profile, "parameter profile (toy|paper)");
    app.add_option("--n", o.n, "capacity in blocks (power of two)");
    app.add_option("--m", o.m, "segments per block (0 = profile default)");
    app.add_option("--per-level", o.per_level, "challenges per level");
    app.add_option("--seed", o.seed, "deterministic randomness seed (0 = entropy)");
    app.add_option("--store", o.store, "server snapshot file (in-process transport)");
    app.add_option("--server", o.server, "host:port of a running server (TCP transport)");

    std::string pub_path, sec_path, state_path, data_path, out_path, report_path, mode_spec;
    uint64_t index = 0;
    unsigned trials = 1;
    uint16_t port = 4917;
    int max_conn = 0;
    std::string n_values = "64,4096";

    auto* keygen = app.add_subcommand("keygen", "generate a parameter set and key files");
    keygen->add_option("--out-pub", pub_path, "public parameter file")->required();
    keygen->add_option("--out-sec", sec_path, "secret key file")->required();

    auto* init = app.add_subcommand("init", "preprocess and upload a file");
    init->add_option("--pub", pub_path)->required();
    init->add_option("--sec", sec_path)->required();
    init->add_option("--file", data_path, "file to outsource")->required();
    init->add_option("--state", state_path, "client state output")->required();
    std::string out_pub;
    init->add_option("--out-pub", out_pub,
                     "write the finalized public parameters (with the file id) here; "
                     "defaults to updating --pub in place");

    auto* read = app.add_subcommand("read", "authenticated read of one block");
    read->add_option("--state", state_path)->required();
    read->add_option("--index", index, "logical block index")->required();
    read->add_option("--out", out_path, "write the block payload here");

    auto* write = app.add_subcommand("write", "modify / insert / delete one block");
    write->add_option("--state", state_path)->required();
    int64_t mod_i = -1, ins_i = -2, del_i = -1;
    write->add_option("--modify", mod_i, "modify logical index i");
    write->add_option("--insert", ins_i, "insert after logical index i (-1 = prepend)");
    write->add_option("--delete", del_i, "delete logical index i");
    write->add_option("--data", data_path, "payload file (modify/insert)");

    auto* audit = app.add_subcommand("audit", "public audit using the latest counter statement");
    audit->add_option("--pub", pub_path)->required();
    audit->add_option("--trials", trials, "number of independent audits");

    auto* extract = app.add_subcommand("extract", "reconstruct the file by challenge-response");
    extract->add_option("--pub", pub_path)->required();
    extract->add_option("--out", out_path, "reconstructed file")->required();
    extract->add_option("--report", report_path, "JSON-lines extraction report");

    auto* attack = app.add_subcommand("attack",
                                      "set the server's adversary mode (delete and bitflip "
                                      "corrupt stored data irreversibly)");
    attack->add_option("--mode", mode_spec, "honest | delete:<level|C|all>:<f> | stale:<addr> | bitflip:<addr>:<seg>")
        ->required();

    auto* serve = app.add_subcommand("serve", "run the TCP server on a snapshot");
    serve->add_option("--port", port);
    serve->add_option("--max-conn", max_conn, "exit after this many connections (0 = forever)");

    auto* bench = app.add_subcommand("bench", "measure read/write/audit transfer costs");
    bench->add_option("--n-values", n_values, "comma-separated capacities");

    CLI11_PARSE(app, argc, argv);

    try {
        load_config(o);

        if (*keygen) {
            Rng rng = make_rng(o);
            SetupOptions so = setup_options_for(o.profile, o.n, o.m);
            auto [P, S] = setup(so, rng);
            std::ofstream pub(pub_path, std::ios::trunc), sec(sec_path, std::ios::trunc);
            write_params(pub, P);
            write_secret(sec, S);
            std::cout << "ok keygen profile=" << o.profile << " n=" << P.n << " m=" << P.m
                      << " lambda_p=" << P.lambda_p << " lambda_q=" << P.lambda_q << "\n";
            return 0;
        }

        if (*bench) {
            std::cout << "n,m,levels,beta_wire,read_bytes,write_avg,write_residual,audit_bytes,"
                         "audit_residual,audit_entries,tag_nominal\n";
            std::stringstream ns(n_values);
            std::string tok;
            while (std::getline(ns, tok, ',')) {
                uint64_t n = std::stoull(tok);
                BenchResult r = run_bench(o.profile, n, o.m ? o.m : 4, o.per_level,
                                          o.seed ? o.seed : 7);
                std::cout << r.n << ',' << r.m << ',' << r.levels << ',' << r.beta_wire << ','
                          << r.read_bytes << ',' << r.write_avg << ',' << r.write_residual() << ','
                          << r.audit_bytes << ',' << r.audit_residual() << ',' << r.audit_entries
                          << ',' << r.tag_nominal << "\n";
            }
            return 0;
        }

        if (*serve) {
            Session s = Session::open(o);
            PorServer* srv = s.local.get();
            if (!srv) throw CLI::ValidationError("serve", "serve needs --store");
            std::cerr << "listening on 127.0.0.1:" << port << "\n";
            serve_tcp(port, [srv](const Frame& f) { return srv->handle_frame(f); }, {}, max_conn);
            s.persist();
            return 0;
        }

        if (*init) {
            SystemParams P;
            SecretState S;
            {
                std::ifstream pin(pub_path);
                if (!pin) throw std::runtime_error("cannot open " + pub_path);
                P = read_params(pin);
                std::ifstream sin(sec_path);
                if (!sin) throw std::runtime_error("cannot open " + sec_path);
                S = read_secret(sin);
            }
            Session s = Session::open(o, /*fresh_ok=*/true);
            Rng rng = make_rng(o);
            PorClient client = PorClient::init(P, S, read_file(data_path), *s.ep, rng);
            save_client(state_path, client);
            {
                // the verifier needs the finalized parameters, fid included
                std::ofstream pub(out_pub.empty() ? pub_path : out_pub, std::ios::trunc);
                write_params(pub, client.state().params);
            }
            s.persist();
            std::cout << "ok init fid=" << to_hex(client.state().params.fid)
                      << " blocks=" << client.state().size() << "\n";
            return 0;
        }

        if (*read) {
            Session s = Session::open(o);
            PorClient client(load_client(state_path), *s.ep);
            Vec block = client.read(index);
            Bytes data = block_to_bytes(client.state().params, block);
            if (!out_path.empty()) write_file(out_path, data);
            std::cout << "ok read index=" << index << " bytes=" << data.size()
                      << (out_path.empty() ? " hex=" + to_hex(data) : "") << "\n";
            return 0;
        }

        if (*write) {
            Session s = Session::open(o);
            PorClient client(load_client(state_path), *s.ep);
            const SystemParams& P = client.state().params;
            WriteRecord rec;
            if (write->count("--modify")) {
                rec.type = UpdType::Modify;
                rec.logical_index = mod_i;
                rec.payload = segment_block(P, read_file(data_path));
            } else if (write->count("--insert")) {
                rec.type = UpdType::Insert;
                rec.logical_index = ins_i;
                rec.payload = segment_block(P, read_file(data_path));
            } else if (write->count("--delete")) {
                rec.type = UpdType::Delete;
                rec.logical_index = del_i;
                rec.payload = Vec(P.m, mpz_class(0));
            } else {
                throw CLI::ValidationError("write", "one of --modify/--insert/--delete required");
            }
            client.write(rec);
            save_client(state_path, client);
            s.persist();
            std::cout << "ok write W=" << client.state().W << " size=" << client.state().size()
                      << " bytes=" << s.meter.grand_total() << "\n";
            return 0;
        }

        if (*audit) {
            SystemParams P;
            {
                std::ifstream pin(pub_path);
                if (!pin) throw std::runtime_error("cannot open " + pub_path);
                P = read_params(pin);
            }
            Session s = Session::open(o);
            Rng rng = make_rng(o);
            CounterStatement st = fetch_statement(P, *s.ep);
            unsigned passed = 0;
            std::string reason;
            for (unsigned t = 0; t < trials; ++t) {
                AuditOutcome out = run_audit(P, *s.ep, st, o.per_level, rng);
                if (out.ok)
                    ++passed;
                else
                    reason = out.reason;
                if (out.vacuous) std::cout << "note: vacuous audit (nothing challengeable)\n";
            }
            std::cout << (passed == trials ? "ok" : "FAIL") << " audit passed=" << passed << "/"
                      << trials << " W=" << st.W
                      << " bytes=" << s.meter.of(ByteMeter::Op::Audit).total()
                      << (reason.empty() ? "" : " reason=" + reason) << "\n";
            return passed == trials ? 0 : 2;
        }

        if (*extract) {
            SystemParams P;
            {
                std::ifstream pin(pub_path);
                if (!pin) throw std::runtime_error("cannot open " + pub_path);
                P = read_params(pin);
            }
            Session s = Session::open(o);
            Rng rng = make_rng(o);
            CounterStatement st = fetch_statement(P, *s.ep);
            LinkOracle oracle(P, *s.ep);
            ExtractResult res;
            int rc = 0;
            try {
                res = extract_all(P, oracle, st, {}, rng);
            } catch (const ExtractionFailure& e) {
                std::cerr << "FAIL " << e.what() << "\n";
                res.reports.push_back(e.report);
                rc = 2;
            }
            if (!report_path.empty()) {
                std::ofstream rep(report_path, std::ios::trunc);
                for (const auto& r : res.reports) {
                    json j{{"structure", r.structure}, {"level", r.level},     {"slots", r.slots},
                           {"responsive", r.responsive}, {"attempts", r.attempts}, {"rank", r.rank},
                           {"ok", r.ok}};
                    rep << j.dump() << "\n";
                }
            }
            if (rc == 0) {
                Bytes out;
                for (const auto& b : res.blocks) {
                    Bytes piece = block_to_bytes(P, b);
                    put_bytes(out, piece);
                }
                write_file(out_path, out);
                std::cout << "ok extract blocks=" << res.blocks.size() << " bytes=" << out.size()
                          << "\n";
            }
            return rc;
        }

        if (*attack) {
            Session s = Session::open(o);
            Bytes spec(mode_spec.begin(), mode_spec.end());
            Bytes payload;
            put_lp(payload, spec);
            s.ep->call(FrameType::AttackReq, std::move(payload), FrameType::AttackResp);
            s.persist();
            std::cout << "ok attack mode=" << mode_spec << "\n";
            return 0;
        }
    } catch (const AbortError& e) {
        std::cerr << "FAIL " << e.what() << "\n";
        return 2;
    } catch (const RemoteError& e) {
        std::cerr << "FAIL server: " << e.what() << "\n";
        return e.code;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
