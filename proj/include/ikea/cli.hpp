#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "ikea/config.hpp"
#include "ikea/policy.hpp"

namespace ikea {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// "scripted:<file>", "toy:<file>" or "remote:<url>".
PolicyHandle make_policy(const std::string& spec);

/// Entry point of the ikea command; `getenv_fn` supplies IKEA_* overrides.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const std::function<const char*(const char*)>& getenv_fn);

}  // namespace ikea
