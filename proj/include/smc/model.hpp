#ifndef SMC_MODEL_HPP
#define SMC_MODEL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "smc/distribution.hpp"

namespace smc {

enum class ClockMode { restart, resume }; // JSON: "restart" | "continue"

struct StateDef {
    std::string name;
    bool absorbing = false;
    bool regeneration = true;
    bool operator==(const StateDef&) const = default;
};

struct TransitionDef {
    int from = -1;
    int to = -1;
    DistributionSpec dist = DistributionSpec::exponential(1.0);
    ClockMode clock = ClockMode::restart;
    std::string clock_id; // empty: transition has no shared clock
    bool operator==(const TransitionDef&) const = default;
};

// Added transition from an absorbing state back into the working set; turns
// an absorbing model into a renewal model for steady-state analysis.
struct ArtificialRenewal {
    int from = -1;
    int to = -1;
    double rate = 1.0;
    bool operator==(const ArtificialRenewal&) const = default;
};

struct StateSpaceModel {
    std::vector<StateDef> states;
    std::vector<TransitionDef> transitions;
    std::optional<ArtificialRenewal> renewal;
    int initial = 0;

    int n() const { return static_cast<int>(states.size()); }
    int state_index(const std::string& name) const; // -1 if unknown
    std::vector<int> absorbing_states() const;
    std::vector<int> outflows(int state) const; // transition indices
    std::vector<int> inflows(int state) const;
    bool has_absorbing() const;
    std::string transition_label(int t) const; // "S1->S0[1]" for messages

    StateSpaceModel without_renewal() const;

    bool operator==(const StateSpaceModel&) const = default;
};

// Raw model file: JSON document plus the parameter table, kept so sweeps can
// mutate a value and re-resolve. Numeric fields in distributions and the
// renewal rate may be arithmetic expressions over "params" entries.
class ModelDocument {
public:
    static ModelDocument from_text(const std::string& text); // syntax errors -> ValidationError with line/column
    static ModelDocument from_file(const std::string& path);

    // Validates everything it can and reports all problems at once.
    StateSpaceModel resolve() const;

    // Dotted path, e.g. "params.q" or "transitions.1.dist.shape".
    void set_path(const std::string& dotted_path, double value);

    std::string text() const;

private:
    ModelDocument() = default;
    std::string json_text_;
};

StateSpaceModel parse_model(const std::string& text);
std::string print_model(const StateSpaceModel& model, int indent = 2);

// Arithmetic over + - * / ( ), numbers and parameter names.
double eval_expression(const std::string& expr,
                       const std::map<std::string, double>& params);

} // namespace smc

#endif
