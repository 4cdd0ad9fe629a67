#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace mzq::cli {

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

// Runs one command and returns the process exit code: 0 ok, 2 config or
// parse error, 3 forward-model degeneracy, 4 fit failure. Diagnostics go to
// `err`, progress to `log` unless quiet.
int run(const std::string& command, const RunOptions& opt, std::ostream& log, std::ostream& err);

int cmd_simulate(const RunOptions& opt, std::ostream& log);
int cmd_synth(const RunOptions& opt, std::ostream& log);
int cmd_fit_spectrum(const RunOptions& opt, std::ostream& log, std::ostream& err);
int cmd_fit_rates(const RunOptions& opt, std::ostream& log, std::ostream& err);
int cmd_classify(const RunOptions& opt, std::ostream& log);

// Worker count from MZQ_THREADS, capped by the hardware and by `jobs`.
unsigned worker_count(std::size_t jobs);

}  // namespace mzq::cli
