#ifndef SMC_CLI_HPP
#define SMC_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace smc {

// Exit codes: 0 success, 1 validation error, 2 numerical non-convergence,
// 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

} // namespace smc

#endif
