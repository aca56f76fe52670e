#pragma once

// Command-line front end: simulate, detect, evaluate, aggregate, cv, retrain
// and hypothesis subcommands, each writing CSV tables plus manifest.json.

#include <filesystem>
#include <iosfwd>
#include <string>

namespace botlab::cli {

// Environment variable naming the default output root (used when --out is absent).
inline constexpr const char* kOutRootEnv = "BOTLAB_OUT";

// Returns the process exit code. Diagnostics go to `err`, progress (with
// --verbose) and help text to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace botlab::cli
