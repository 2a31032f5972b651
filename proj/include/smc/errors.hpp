#ifndef SMC_ERRORS_HPP
#define SMC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace smc {

// Model/input problems. Collects every issue found, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
    explicit ValidationError(const std::string& issue)
        : ValidationError(std::vector<std::string>{issue}) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (const auto& e : v) {
            if (!s.empty()) s += "\n";
            s += e;
        }
        return s;
    }
    std::vector<std::string> issues_;
};

// Numerical failures: singular solves, divergent integrals, eigenvalue
// degeneracies, step-size underflow.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace smc

#endif
