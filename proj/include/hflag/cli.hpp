#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hflag/flagkernel.hpp"
#include "hflag/lipschitz.hpp"
#include "hflag/lp_frame.hpp"
#include "hflag/sampling.hpp"

namespace hflag::cli {

// Bad or unknown config entry; `key` is "section.name" (or empty).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Plain "[section]" / "key = value" text; '#' and ';' start comments.
// Keys are addressed as "section.key". Reads are tracked so that leftover
// (misspelt) keys can be reported.
class IniConfig {
public:
    static IniConfig parse(std::istream& is, const std::string& source = "<config>");
    static IniConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
    std::vector<std::string> get_words(const std::string& key, std::vector<std::string> fallback) const;

    std::vector<std::string> unread() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

struct ExperimentConfig {
    Grid grid;
    FrameSpec frame;
    std::vector<FlagExponent> exponents;
    std::vector<std::string> corpus;
    CorpusParams corpus_params;
    IncrementPlan plan;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::filesystem::path out_dir = "out";

    // per command
    std::int64_t group_samples = 100000;
    bool group_fault = false;
    std::vector<int> ranges{2, 3, 4};
    double band_lo = 0.05, band_hi = 5.0;
    std::string kernel_kind = "riesz";
    double kernel_eps = 1e-6;
    bool kernel_expect_pass = true;
    std::vector<std::string> kernel_checks{"diff", "cancel"};
    std::vector<double> orth_s{0.5, 1.0}, orth_t{0.5, 1.0};
    double operator_eps = 1.0 / 16;

    // Unknown keys and bad values throw ConfigError naming the key.
    static ExperimentConfig from(const IniConfig& ini);
    FuncEval corpus_entry(const std::string& name) const;
    FlagKernelSpec kernel() const;
    FlagKernelSpec kernel(double eps) const;
};

// Collects output files, then writes manifest.json (path, size, sha256 of
// every file) and metadata.json (timestamps, not hashed, so the rest is
// reproducible byte for byte).
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root);
    const std::filesystem::path& root() const { return root_; }
    void write_text(const std::string& name, const std::string& content);
    void write_field(const std::string& name, const SampledField& field);
    void finish(const std::string& command, int exit_code);
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path root_;
    std::vector<std::string> files_;
    std::string started_;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Exit codes: 0 all assertions pass, 1 some assertion failed, 2 config error.
inline constexpr int kExitPass = 0, kExitFail = 1, kExitConfig = 2;

std::vector<std::string> command_names();
// Runs one subcommand; messages go to `log`. ConfigError propagates.
int run_command(const std::string& name, const ExperimentConfig& cfg, std::ostream& log);

// Full entry point used by main (argument parsing included).
int main(int argc, char** argv);

}  // namespace hflag::cli
