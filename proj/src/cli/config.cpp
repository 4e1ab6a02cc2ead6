#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "hflag/cli.hpp"

namespace hflag::cli {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_double(const std::string& key, const std::string& w) {
    double v = 0.0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size())
        throw ConfigError(key, key + ": not a number: '" + w + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& w) {
    long long v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size())
        throw ConfigError(key, key + ": not an integer: '" + w + "'");
    return v;
}

std::pair<int, int> int_range(const IniConfig& ini, const std::string& key, std::pair<int, int> fallback) {
    const auto v = ini.get_doubles(key, {double(fallback.first), double(fallback.second)});
    if (v.size() != 2 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]) || v[0] > v[1])
        throw ConfigError(key, key + ": expected two integers lo hi with lo <= hi");
    return {static_cast<int>(v[0]), static_cast<int>(v[1])};
}

template <class F>
auto checked(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, key + ": " + e.what());
    }
}

}  // namespace

IniConfig IniConfig::parse(std::istream& is, const std::string& source) {
    IniConfig c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", source + ":" + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", source + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string name = trim(line.substr(0, eq));
        if (section.empty() || name.empty())
            throw ConfigError(name, source + ":" + std::to_string(lineno) + ": key outside a section");
        c.values_[section + "." + name] = trim(line.substr(eq + 1));
    }
    return c;
}

IniConfig IniConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot open config " + path.string());
    return parse(is, path.string());
}

std::string IniConfig::get(const std::string& key, const std::string& fallback) const {
    read_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double IniConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) {
        read_.insert(key);
        return fallback;
    }
    return to_double(key, get(key, ""));
}

long long IniConfig::get_int(const std::string& key, long long fallback) const {
    if (!has(key)) {
        read_.insert(key);
        return fallback;
    }
    return to_int(key, get(key, ""));
}

bool IniConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) {
        read_.insert(key);
        return fallback;
    }
    const std::string v = get(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, key + ": expected true or false");
}

std::vector<double> IniConfig::get_doubles(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) {
        read_.insert(key);
        return fallback;
    }
    std::vector<double> out;
    for (const auto& w : split_words(get(key, ""))) out.push_back(to_double(key, w));
    return out;
}

std::vector<std::string> IniConfig::get_words(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) {
        read_.insert(key);
        return fallback;
    }
    return split_words(get(key, ""));
}

std::vector<std::string> IniConfig::unread() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!read_.contains(k)) out.push_back(k);
    return out;
}

ExperimentConfig ExperimentConfig::from(const IniConfig& ini) {
    ExperimentConfig c;

    // the long u-box lets the larger t scales of the default frame fit
    const auto extent = ini.get_doubles("grid.extent", {2, 2, 16});
    const auto counts_d = ini.get_doubles("grid.counts", {16, 16, 64});
    std::vector<int> counts;
    for (double d : counts_d) {
        if (d != std::floor(d)) throw ConfigError("grid.counts", "grid.counts: expected integers");
        counts.push_back(static_cast<int>(d));
    }
    c.grid = checked("grid.counts", [&] { return make_grid(1, extent, counts); });

    FrameSpec& f = c.frame;
    f.M = static_cast<int>(ini.get_int("frame.M", f.M));
    f.psi2_order = static_cast<int>(ini.get_int("frame.psi2_order", f.psi2_order));
    f.psi2_peak = ini.get_double("frame.psi2_peak", f.psi2_peak);
    std::tie(f.j_min, f.j_max) = int_range(ini, "frame.j", {-1, 2});
    std::tie(f.k_min, f.k_max) = int_range(ini, "frame.k", {-2, 3});
    f.voices_s = static_cast<int>(ini.get_int("frame.voices_s", 1));
    f.voices_t = static_cast<int>(ini.get_int("frame.voices_t", 1));
    f.pad = static_cast<int>(ini.get_int("frame.pad", f.pad));
    checked("frame", [&] { f.validate(); return 0; });

    const std::string alphas = ini.get("exponents.alpha", "0.5 0.5");
    std::stringstream ss(alphas);
    std::string pair;
    while (std::getline(ss, pair, ',')) {
        std::istringstream ps(pair);
        std::vector<double> v;
        for (std::string w; ps >> w;) v.push_back(to_double("exponents.alpha", w));
        if (v.empty()) continue;
        if (v.size() != 2) throw ConfigError("exponents.alpha", "exponents.alpha: expected 'a1 a2' pairs separated by ','");
        c.exponents.push_back(checked("exponents.alpha", [&] { return FlagExponent::make(v[0], v[1]); }));
    }
    if (c.exponents.empty()) throw ConfigError("exponents.alpha", "exponents.alpha: no exponent given");

    CorpusParams& p = c.corpus_params;
    p.box = extent;
    p.sigma = ini.get_double("corpus.sigma", p.sigma);
    p.tau = ini.get_double("corpus.tau", p.tau);
    p.radius = ini.get_double("corpus.radius", p.radius);
    p.radius_u = ini.get_double("corpus.radius_u", p.radius_u);
    p.alpha1 = ini.get_double("corpus.alpha1", c.exponents.front().alpha1);
    p.alpha2 = ini.get_double("corpus.alpha2", c.exponents.front().alpha2);
    p.J = static_cast<int>(ini.get_int("corpus.J", p.J));
    p.K = static_cast<int>(ini.get_int("corpus.K", p.K));
    p.base1 = ini.get_double("corpus.base1", p.base1);
    p.base2 = ini.get_double("corpus.base2", p.base2);
    p.degree = static_cast<int>(ini.get_int("corpus.degree", p.degree));
    p.axis = static_cast<int>(ini.get_int("corpus.axis", p.axis));
    p.amplitude = ini.get_double("corpus.amplitude", p.amplitude);
    c.corpus = ini.get_words("corpus.names", {"gaussian_bump", "smooth_bump"});
    if (c.corpus.empty()) throw ConfigError("corpus.names", "corpus.names: empty corpus");
    for (const auto& name : c.corpus) checked("corpus.names", [&] { return hflag::corpus(name, p); });

    c.seed = static_cast<std::uint64_t>(ini.get_int("plan.seed", 1));
    IncrementPlan& pl = c.plan;
    pl = IncrementPlan::for_box(extent);
    pl.base_per_axis = static_cast<int>(ini.get_int("plan.base_per_axis", pl.base_per_axis));
    std::tie(pl.j_min, pl.j_max) = int_range(ini, "plan.j", {pl.j_min, pl.j_max});
    std::tie(pl.k_min, pl.k_max) = int_range(ini, "plan.k", {pl.k_min, pl.k_max});
    pl.steps_per_octave = static_cast<int>(ini.get_int("plan.steps_per_octave", pl.steps_per_octave));
    pl.directions = static_cast<int>(ini.get_int("plan.directions", pl.directions));
    pl.seed = c.seed;
    checked("plan", [&] { pl.validate(); return 0; });

    const long long threads = ini.get_int("run.threads", 1);
    if (threads < 0) throw ConfigError("run.threads", "run.threads: must be >= 0");
    c.threads = static_cast<unsigned>(threads);
    c.out_dir = ini.get("run.out", "out");

    c.group_samples = ini.get_int("group.samples", c.group_samples);
    if (c.group_samples < 1) throw ConfigError("group.samples", "group.samples: must be >= 1");
    c.group_fault = ini.get_bool("group.fault", false);

    c.ranges.clear();
    for (double r : ini.get_doubles("reconstruct.ranges", {2, 3, 4})) {
        if (r != std::floor(r) || r < 0) throw ConfigError("reconstruct.ranges", "reconstruct.ranges: expected integers >= 0");
        c.ranges.push_back(static_cast<int>(r));
    }
    if (c.ranges.empty()) throw ConfigError("reconstruct.ranges", "reconstruct.ranges: empty");

    const auto band = ini.get_doubles("equiv.band", {c.band_lo, c.band_hi});
    if (band.size() != 2 || !(band[0] > 0 && band[1] > band[0]))
        throw ConfigError("equiv.band", "equiv.band: expected 0 < lo < hi");
    c.band_lo = band[0];
    c.band_hi = band[1];

    c.kernel_kind = ini.get("kernel.kind", c.kernel_kind);
    c.kernel_eps = ini.get_double("kernel.eps", c.kernel_eps);
    if (!(c.kernel_eps > 0)) throw ConfigError("kernel.eps", "kernel.eps: must be > 0");
    const std::string expect = ini.get("kernel.expect", "pass");
    if (expect != "pass" && expect != "fail") throw ConfigError("kernel.expect", "kernel.expect: pass or fail");
    c.kernel_expect_pass = expect == "pass";
    c.kernel_checks = ini.get_words("kernel.checks", c.kernel_checks);
    for (const auto& w : c.kernel_checks)
        if (w != "diff" && w != "cancel") throw ConfigError("kernel.checks", "kernel.checks: unknown check '" + w + "'");
    checked("kernel.kind", [&] { return c.kernel(); });

    c.orth_s = ini.get_doubles("orth.s", c.orth_s);
    c.orth_t = ini.get_doubles("orth.t", c.orth_t);
    if (c.orth_s.empty() || c.orth_t.empty()) throw ConfigError("orth.s", "orth.s/orth.t: empty scale list");

    c.operator_eps = ini.get_double("operator.eps", c.operator_eps);
    if (!(c.operator_eps > 0)) throw ConfigError("operator.eps", "operator.eps: must be > 0");

    const auto left = ini.unread();
    if (!left.empty()) throw ConfigError(left.front(), "unknown config key " + left.front());
    return c;
}

FuncEval ExperimentConfig::corpus_entry(const std::string& name) const { return hflag::corpus(name, corpus_params); }

FlagKernelSpec ExperimentConfig::kernel() const { return kernel(kernel_eps); }

FlagKernelSpec ExperimentConfig::kernel(double eps) const {
    if (kernel_kind == "riesz") return riesz_flag_kernel(eps);
    if (kernel_kind == "log_corrupted") return log_corrupted(riesz_flag_kernel(eps));
    if (kernel_kind == "even_control") return even_flag_control();
    if (kernel_kind == "zero") return zero_flag_kernel();
    throw ConfigError("kernel.kind", "kernel.kind: unknown kernel '" + kernel_kind + "'");
}

}  // namespace hflag::cli
