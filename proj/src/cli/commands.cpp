#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "hflag/cli.hpp"
#include "hflag/hgroup.hpp"

namespace hflag::cli {

using nlohmann::json;

namespace {

std::string now_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string read_all(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<NamedField> sampled_corpus(const ExperimentConfig& cfg) {
    std::vector<NamedField> out;
    for (const auto& name : cfg.corpus) out.push_back({name, sample(cfg.corpus_entry(name), cfg.grid, cfg.threads)});
    return out;
}

FrameSpec with_range(FrameSpec f, int r) {
    f.j_min = f.k_min = -r;
    f.j_max = f.k_max = r;
    return f;
}

TransformOptions topt(const ExperimentConfig& cfg) {
    TransformOptions o;
    o.threads = cfg.threads;
    return o;
}

// --- commands ---------------------------------------------------------------

int cmd_group_check(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const auto rows = group_invariant_suite(cfg.group_samples, cfg.seed, 1, cfg.group_fault);
    std::string csv = "check,pass,worst,tolerance\n";
    json j = json::array();
    bool all = true;
    for (const auto& r : rows) {
        csv += r.name + "," + (r.pass ? "1" : "0") + "," + num(r.worst) + "," + num(r.tolerance) + "\n";
        j.push_back({{"check", r.name}, {"pass", r.pass}, {"worst", r.worst}, {"tolerance", r.tolerance}});
        if (!r.pass && all) log << "FAIL " << r.name << ": worst " << r.worst << " > " << r.tolerance << "\n";
        all = all && r.pass;
    }
    out.write_text("group_check.csv", csv);
    out.write_text("group_check.json", json{{"samples", cfg.group_samples}, {"seed", cfg.seed}, {"pass", all}, {"rows", j}}.dump(2));
    if (all) log << "PASS " << rows.size() << " group invariants\n";
    return all ? kExitPass : kExitFail;
}

int cmd_frame(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const std::string name = cfg.corpus.front();
    const SampledField f = sample(cfg.corpus_entry(name), cfg.grid, cfg.threads);
    json index = json::array();
    const auto warnings = lp_transform_each(
        f, cfg.frame,
        [&](const ScaleCoefficient& c) {
            const std::string path = "c_j" + std::to_string(c.jv) + "_k" + std::to_string(c.kv) + ".hfld";
            out.write_field(path, c.field);
            index.push_back({{"j", c.jv}, {"k", c.kv}, {"s", c.s}, {"t", c.t}, {"path", path}});
        },
        topt(cfg));
    out.write_text("index.json", json{{"function", name}, {"frame", cfg.frame.id()}, {"coefficients", index},
                                      {"warnings", warnings}}
                                     .dump(2));
    log << "wrote " << index.size() << " coefficient fields for " << name << "\n";
    return kExitPass;
}

int cmd_reconstruct(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    std::vector<FrameSpec> frames;
    for (int r : cfg.ranges) frames.push_back(with_range(cfg.frame, r));
    std::string csv = "function,range,kappa,rel_error\n";
    json j = json::array();
    bool monotone = true;
    for (const auto& [name, f] : sampled_corpus(cfg)) {
        const auto rec = reconstruction_sweep(f, frames, f, topt(cfg));
        for (std::size_t i = 0; i < rec.size(); ++i) {
            csv += name + "," + std::to_string(cfg.ranges[i]) + "," + num(rec[i].kappa) + "," + num(rec[i].rel_error) + "\n";
            j.push_back({{"function", name}, {"range", cfg.ranges[i]}, {"kappa", rec[i].kappa},
                         {"rel_error", rec[i].rel_error}, {"warnings", rec[i].warnings}});
            if (i > 0 && rec[i].rel_error > rec[i - 1].rel_error) {
                log << "FAIL " << name << ": error grows from range " << cfg.ranges[i - 1] << " to " << cfg.ranges[i] << "\n";
                monotone = false;
            }
        }
    }
    out.write_text("reconstruct.csv", csv);
    out.write_text("reconstruct.json", j.dump(2));
    return monotone ? kExitPass : kExitFail;
}

std::vector<NormReport> norm_reports(const ExperimentConfig& cfg) {
    std::vector<NormReport> reps;
    for (const auto& name : cfg.corpus) {
        const FuncEval f = cfg.corpus_entry(name);
        const LpSupTable tab = lp_sup_table(sample(f, cfg.grid, cfg.threads), cfg.frame, {}, topt(cfg));
        for (const auto& e : cfg.exponents) reps.push_back(equivalence_report(name, f, tab, e, cfg.plan, cfg.threads));
    }
    return reps;
}

void write_reports(const std::vector<NormReport>& reps, const std::string& stem, OutputDir& out) {
    std::string csv = NormReport::csv_header() + "\n";
    std::string js = "[\n";
    for (std::size_t i = 0; i < reps.size(); ++i) {
        csv += reps[i].csv_row() + "\n";
        js += reps[i].to_json() + (i + 1 < reps.size() ? ",\n" : "\n");
    }
    out.write_text(stem + ".csv", csv);
    out.write_text(stem + ".json", js + "]\n");
}

int cmd_lipnorm(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const auto reps = norm_reports(cfg);
    write_reports(reps, "lipnorm", out);
    bool ok = true;
    for (const auto& r : reps) {
        if (!std::isfinite(r.diff_norm) || !std::isfinite(r.lp_norm) || r.inconsistent) {
            log << "FAIL " << r.function << " " << r.exponent.id() << ": non-finite or inconsistent norms\n";
            ok = false;
        }
    }
    return ok ? kExitPass : kExitFail;
}

int cmd_equiv(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const auto reps = norm_reports(cfg);
    write_reports(reps, "equiv", out);
    bool ok = true;
    double lo = INFINITY, hi = 0.0;
    for (const auto& r : reps) {
        if (r.degenerate) continue;
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
        if (!(r.ratio >= cfg.band_lo && r.ratio <= cfg.band_hi)) {
            log << "FAIL " << r.function << " " << r.exponent.id() << ": ratio " << r.ratio << " outside ["
                << cfg.band_lo << ", " << cfg.band_hi << "]\n";
            ok = false;
        }
    }
    if (hi > 0 && hi / lo >= 100.0) {
        log << "FAIL ratio span " << hi / lo << " >= 100\n";
        ok = false;
    }
    if (ok) log << "PASS ratios in [" << lo << ", " << hi << "]\n";
    return ok ? kExitPass : kExitFail;
}

int cmd_kernel_check(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const FlagKernelSpec K = cfg.kernel();
    std::vector<CheckTable> tables;
    for (const auto& c : cfg.kernel_checks) {
        if (c == "diff") tables.push_back(check_diff_ineq(K, orders_up_to(1, 1), {}, cfg.threads));
        if (c == "cancel") tables.push_back(check_cancellation(K, BumpFamily::standard(), 1, 1, cfg.threads));
    }
    std::string csv = CheckTable::csv_header();
    json j = json::array();
    bool pass = true;
    for (const auto& t : tables) {
        csv += t.csv();
        j.push_back(json::parse(t.to_json()));
        pass = pass && t.pass();
    }
    out.write_text("kernel_check.csv", csv);
    out.write_text("kernel_check.json", json{{"kernel", K.name}, {"pass", pass}, {"tables", j}}.dump(2));
    log << K.name << ": " << (pass ? "PASS" : "FAIL") << " (expected " << (cfg.kernel_expect_pass ? "PASS" : "FAIL")
        << ")\n";
    return pass == cfg.kernel_expect_pass ? kExitPass : kExitFail;
}

int cmd_operator(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    const FlagKernelSpec K = cfg.kernel(cfg.operator_eps);
    if (!K.uhat) throw ConfigError("kernel.kind", "kernel.kind: " + K.name + " has no u-transform for operator");
    const auto fields = sampled_corpus(cfg);
    bool ok = true;
    json j = json::array();
    for (const auto& e : cfg.exponents) {
        const OperatorTable T = operator_lip_bound(K, fields, e, cfg.frame, cfg.threads);
        out.write_text("operator_" + e.id() + ".csv", T.csv());
        j.push_back({{"alpha", {e.alpha1, e.alpha2}}, {"max_ratio", T.max_ratio}});
        if (!std::isfinite(T.max_ratio)) {
            log << "FAIL " << e.id() << ": ratio not finite\n";
            ok = false;
        } else {
            log << e.id() << ": max ratio " << T.max_ratio << "\n";
        }
    }
    out.write_text("operator.json", json{{"kernel", K.name}, {"eps", cfg.operator_eps}, {"tables", j}}.dump(2));
    return ok ? kExitPass : kExitFail;
}

int cmd_orth(const ExperimentConfig& cfg, OutputDir& out, std::ostream& log) {
    OrthOptions opt;
    opt.threads = cfg.threads;
    const OrthTable T = almost_orth_decay(cfg.frame, cfg.orth_s, cfg.orth_t, opt);
    out.write_text("orth.csv", T.csv());
    out.write_text("orth.json", json{{"C", T.C},
                                     {"diagonal_dominant", T.diagonal_dominant},
                                     {"max_normalised", T.max_normalised},
                                     {"slope_s", T.slope_s},
                                     {"slope_t", T.slope_t}}
                                    .dump(2));
    const bool ok = T.diagonal_dominant && std::isfinite(T.C);
    log << "C = " << T.C << ", diagonal dominant " << (T.diagonal_dominant ? "yes" : "no") << "\n";
    return ok ? kExitPass : kExitFail;
}

using Command = std::function<int(const ExperimentConfig&, OutputDir&, std::ostream&)>;

const std::vector<std::pair<std::string, Command>>& commands() {
    static const std::vector<std::pair<std::string, Command>> c{
        {"group-check", cmd_group_check}, {"frame", cmd_frame},   {"reconstruct", cmd_reconstruct},
        {"lipnorm", cmd_lipnorm},         {"equiv", cmd_equiv},   {"kernel-check", cmd_kernel_check},
        {"operator", cmd_operator},       {"orth", cmd_orth},
    };
    return c;
}

}  // namespace

// --- output -----------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_all(path)); }

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)), started_(now_utc()) {
    std::filesystem::create_directories(root_);
}

void OutputDir::write_text(const std::string& name, const std::string& content) {
    std::ofstream os(root_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (root_ / name).string());
    os << content;
    files_.push_back(name);
}

void OutputDir::write_field(const std::string& name, const SampledField& field) {
    save_field(field, (root_ / name).string());
    files_.push_back(name);
}

void OutputDir::finish(const std::string& command, int exit_code) {
    json files = json::array();
    for (const auto& f : files_) {
        const std::string bytes = read_all(root_ / f);
        files.push_back({{"path", f}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    json m{{"command", command}, {"exit_code", exit_code}, {"files", files}, {"metadata", "metadata.json"}};
    std::ofstream(root_ / "manifest.json") << m.dump(2) << "\n";
    std::ofstream(root_ / "metadata.json")
        << json{{"command", command}, {"started", started_}, {"finished", now_utc()}}.dump(2) << "\n";
}

// --- driver -----------------------------------------------------------------

std::vector<std::string> command_names() {
    std::vector<std::string> out;
    for (const auto& [n, c] : commands()) out.push_back(n);
    return out;
}

int run_command(const std::string& name, const ExperimentConfig& cfg, std::ostream& log) {
    for (const auto& [n, cmd] : commands()) {
        if (n != name) continue;
        OutputDir out(cfg.out_dir / n);
        const int code = cmd(cfg, out, log);
        out.finish(n, code);
        return code;
    }
    throw ConfigError("", "unknown command " + name);
}

int main(int argc, char** argv) {
    CLI::App app{"Flag Lipschitz experiments on the Heisenberg group H^1"};
    std::string config, out_dir;
    long long threads = -1, seed = -1;
    bool fault = false;
    app.add_option("--config", config, "config file (ini-style)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");
    app.add_option("--seed", seed, "random plan seed");
    app.require_subcommand(1, 1);
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        if (name == "group-check") sub->add_flag("--inject-fault", fault, "flip the twist sign in mul (negative control)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }
    try {
        IniConfig ini = config.empty() ? IniConfig{} : IniConfig::load(config);
        if (!out_dir.empty()) ini.set("run.out", out_dir);
        if (threads >= 0) ini.set("run.threads", std::to_string(threads));
        if (seed >= 0) ini.set("plan.seed", std::to_string(seed));
        if (fault) ini.set("group.fault", "true");
        const ExperimentConfig cfg = ExperimentConfig::from(ini);
        return run_command(app.get_subcommands().front()->get_name(), cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
}

}  // namespace hflag::cli
