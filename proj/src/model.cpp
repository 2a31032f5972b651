#include "smc/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "smc/errors.hpp"

namespace smc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// expression evaluator

namespace {

class ExprParser {
public:
    ExprParser(const std::string& s, const std::map<std::string, double>& params)
        : s_(s), params_(params) {}

    double run() {
        const double v = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing characters");
        return v;
    }

private:
    double expr() {
        double v = term();
        for (;;) {
            skip_ws();
            if (accept('+')) v += term();
            else if (accept('-')) v -= term();
            else return v;
        }
    }
    double term() {
        double v = factor();
        for (;;) {
            skip_ws();
            if (accept('*')) v *= factor();
            else if (accept('/')) v /= factor();
            else return v;
        }
    }
    double factor() {
        skip_ws();
        if (accept('-')) return -factor();
        if (accept('+')) return factor();
        if (accept('(')) {
            const double v = expr();
            skip_ws();
            if (!accept(')')) fail("expected ')'");
            return v;
        }
        if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
            size_t used = 0;
            double v;
            try {
                v = std::stod(s_.substr(pos_), &used);
            } catch (const std::exception&) {
                fail("bad number");
            }
            pos_ += used;
            return v;
        }
        if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            const size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            auto it = params_.find(name);
            if (it == params_.end()) fail("unknown parameter '" + name + "'");
            return it->second;
        }
        fail("unexpected character");
        return 0.0;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    [[noreturn]] void fail(const std::string& why) {
        throw ValidationError("expression '" + s_ + "': " + why);
    }

    const std::string& s_;
    const std::map<std::string, double>& params_;
    size_t pos_ = 0;
};

} // namespace

double eval_expression(const std::string& expr,
                       const std::map<std::string, double>& params) {
    return ExprParser(expr, params).run();
}

// ---------------------------------------------------------------------------
// StateSpaceModel helpers

int StateSpaceModel::state_index(const std::string& name) const {
    for (int i = 0; i < n(); ++i)
        if (states[i].name == name) return i;
    return -1;
}

std::vector<int> StateSpaceModel::absorbing_states() const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
        if (states[i].absorbing) out.push_back(i);
    return out;
}

std::vector<int> StateSpaceModel::outflows(int state) const {
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(transitions.size()); ++t)
        if (transitions[t].from == state) out.push_back(t);
    return out;
}

std::vector<int> StateSpaceModel::inflows(int state) const {
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(transitions.size()); ++t)
        if (transitions[t].to == state) out.push_back(t);
    return out;
}

bool StateSpaceModel::has_absorbing() const {
    return !absorbing_states().empty();
}

std::string StateSpaceModel::transition_label(int t) const {
    const auto& tr = transitions.at(t);
    std::ostringstream os;
    os << states[tr.from].name << "->" << states[tr.to].name << "[" << t << "]";
    return os.str();
}

StateSpaceModel StateSpaceModel::without_renewal() const {
    StateSpaceModel m = *this;
    m.renewal.reset();
    return m;
}

// ---------------------------------------------------------------------------
// JSON parsing

namespace {

void line_col(const std::string& text, size_t byte, int& line, int& col) {
    line = 1;
    col = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
}

// Numeric field that may be an expression over params.
std::optional<double> field_number(const json& v,
                                   const std::map<std::string, double>& params,
                                   std::vector<std::string>& errors,
                                   const std::string& ctx) {
    try {
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return eval_expression(v.get<std::string>(), params);
    } catch (const ValidationError& e) {
        errors.push_back(ctx + ": " + e.what());
        return std::nullopt;
    }
    errors.push_back(ctx + ": expected a number or expression string");
    return std::nullopt;
}

std::optional<double> field_number(const json& obj, const char* key,
                                   const std::map<std::string, double>& params,
                                   std::vector<std::string>& errors,
                                   const std::string& ctx) {
    if (!obj.contains(key)) {
        errors.push_back(ctx + ": missing \"" + key + "\"");
        return std::nullopt;
    }
    return field_number(obj.at(key), params, errors, ctx + ".\"" + key + "\"");
}

// Returns nullopt on error; sets dropped=true for exponential rate == 0.
std::optional<DistributionSpec> parse_dist(const json& j,
                                           const std::map<std::string, double>& params,
                                           std::vector<std::string>& errors,
                                           const std::string& ctx, bool& dropped) {
    dropped = false;
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        errors.push_back(ctx + ": distribution must be an object with a \"kind\" string");
        return std::nullopt;
    }
    const std::string kind = j.at("kind").get<std::string>();
    const size_t before = errors.size();
    try {
        if (kind == "exponential") {
            auto rate = field_number(j, "rate", params, errors, ctx);
            if (!rate) return std::nullopt;
            if (*rate == 0.0) {
                dropped = true; // rate-0 transition never fires; drop it
                return std::nullopt;
            }
            return DistributionSpec::exponential(*rate);
        }
        if (kind == "fixed") {
            auto delay = field_number(j, "delay", params, errors, ctx);
            if (!delay) return std::nullopt;
            return DistributionSpec::fixed_delay(*delay);
        }
        if (kind == "weibull") {
            auto shape = field_number(j, "shape", params, errors, ctx);
            if (!shape) return std::nullopt;
            if (j.contains("scale")) {
                auto scale = field_number(j, "scale", params, errors, ctx);
                if (!scale) return std::nullopt;
                return DistributionSpec::weibull(*shape, *scale);
            }
            if (j.contains("mean")) {
                auto mean = field_number(j, "mean", params, errors, ctx);
                if (!mean) return std::nullopt;
                return DistributionSpec::weibull_from_mean(*shape, *mean);
            }
            errors.push_back(ctx + ": weibull needs \"scale\" or \"mean\"");
            return std::nullopt;
        }
        if (kind == "lognormal") {
            if (j.contains("mean_log") || j.contains("sd_log")) {
                auto ml = field_number(j, "mean_log", params, errors, ctx);
                auto sl = field_number(j, "sd_log", params, errors, ctx);
                if (!ml || !sl) return std::nullopt;
                return DistributionSpec::lognormal(*ml, *sl);
            }
            auto mean = field_number(j, "mean", params, errors, ctx);
            auto scv = field_number(j, "scv", params, errors, ctx);
            if (!mean || !scv) return std::nullopt;
            return DistributionSpec::from_mean_scv(DistKind::lognormal, *mean, *scv);
        }
    } catch (const ValidationError& e) {
        errors.push_back(ctx + ": " + e.what());
        return std::nullopt;
    }
    if (errors.size() == before)
        errors.push_back(ctx + ": unknown distribution kind \"" + kind + "\"");
    return std::nullopt;
}

} // namespace

ModelDocument ModelDocument::from_text(const std::string& text) {
    try {
        const json parsed = json::parse(text);
        (void)parsed;
    } catch (const json::parse_error& e) {
        int line = 0, col = 0;
        line_col(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
        std::ostringstream os;
        os << "JSON syntax error at line " << line << ", column " << col << ": " << e.what();
        throw ValidationError(os.str());
    }
    ModelDocument d;
    d.json_text_ = text;
    return d;
}

ModelDocument ModelDocument::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void ModelDocument::set_path(const std::string& dotted_path, double value) {
    json j = json::parse(json_text_);
    std::vector<std::string> segs;
    std::stringstream ss(dotted_path);
    std::string seg;
    while (std::getline(ss, seg, '.')) segs.push_back(seg);
    if (segs.empty()) throw ValidationError("empty sweep path");

    json* cur = &j;
    for (size_t i = 0; i + 1 < segs.size(); ++i) {
        const std::string& s = segs[i];
        if (cur->is_array()) {
            size_t idx = 0;
            try {
                idx = std::stoul(s);
            } catch (const std::exception&) {
                throw ValidationError("sweep path: '" + s + "' is not an array index");
            }
            if (idx >= cur->size()) throw ValidationError("sweep path: index " + s + " out of range");
            cur = &(*cur)[idx];
        } else if (cur->is_object()) {
            if (!cur->contains(s)) {
                if (s == "params" && i == 0)
                    (*cur)["params"] = json::object();
                else
                    throw ValidationError("sweep path: no such field '" + s + "'");
            }
            cur = &(*cur)[s];
        } else {
            throw ValidationError("sweep path: cannot descend into '" + s + "'");
        }
    }
    const std::string& last = segs.back();
    if (cur->is_array()) {
        size_t idx = std::stoul(last);
        if (idx >= cur->size()) throw ValidationError("sweep path: index " + last + " out of range");
        (*cur)[idx] = value;
    } else if (cur->is_object()) {
        const bool creating_param = segs.size() >= 1 && segs[0] == "params";
        if (!cur->contains(last) && !creating_param)
            throw ValidationError("sweep path: no such field '" + last + "'");
        (*cur)[last] = value;
    } else {
        throw ValidationError("sweep path: cannot set '" + last + "'");
    }
    json_text_ = j.dump(2);
}

std::string ModelDocument::text() const { return json_text_; }

StateSpaceModel ModelDocument::resolve() const {
    const json j = json::parse(json_text_);
    std::vector<std::string> errors;
    StateSpaceModel m;

    if (!j.is_object()) throw ValidationError("model file must be a JSON object");

    std::map<std::string, double> params;
    if (j.contains("params")) {
        if (!j.at("params").is_object()) {
            errors.push_back("\"params\" must be an object of name -> number");
        } else {
            for (const auto& [k, v] : j.at("params").items()) {
                if (!v.is_number())
                    errors.push_back("params." + k + " must be a number");
                else
                    params[k] = v.get<double>();
            }
        }
    }

    if (!j.contains("states") || !j.at("states").is_array() || j.at("states").empty()) {
        errors.push_back("model needs a non-empty \"states\" array");
        throw ValidationError(errors);
    }

    for (const auto& js : j.at("states")) {
        StateDef s;
        if (js.is_string()) {
            s.name = js.get<std::string>();
        } else if (js.is_object() && js.contains("name") && js.at("name").is_string()) {
            s.name = js.at("name").get<std::string>();
            s.absorbing = js.value("absorbing", false);
            s.regeneration = js.value("regeneration", true);
        } else {
            errors.push_back("state entries must be names or objects with a \"name\"");
            continue;
        }
        if (m.state_index(s.name) >= 0)
            errors.push_back("duplicate state name \"" + s.name + "\"");
        m.states.push_back(s);
    }

    auto state_of = [&](const json& obj, const char* key, const std::string& ctx) -> int {
        if (!obj.contains(key) || !obj.at(key).is_string()) {
            errors.push_back(ctx + ": missing state name \"" + key + "\"");
            return -1;
        }
        const std::string name = obj.at(key).get<std::string>();
        const int idx = m.state_index(name);
        if (idx < 0) errors.push_back(ctx + ": unknown state \"" + name + "\"");
        return idx;
    };

    if (j.contains("transitions")) {
        if (!j.at("transitions").is_array()) {
            errors.push_back("\"transitions\" must be an array");
        } else {
            int ti = 0;
            for (const auto& jt : j.at("transitions")) {
                std::ostringstream ctxs;
                ctxs << "transitions[" << ti++ << "]";
                const std::string ctx = ctxs.str();
                if (!jt.is_object()) {
                    errors.push_back(ctx + ": must be an object");
                    continue;
                }
                TransitionDef t;
                t.from = state_of(jt, "from", ctx);
                t.to = state_of(jt, "to", ctx);
                if (t.from >= 0 && t.from == t.to)
                    errors.push_back(ctx + ": self-loop on \"" + m.states[t.from].name + "\"");
                if (!jt.contains("dist")) {
                    errors.push_back(ctx + ": missing \"dist\"");
                    continue;
                }
                bool dropped = false;
                auto dist = parse_dist(jt.at("dist"), params, errors, ctx, dropped);
                if (dropped) continue;
                if (!dist) continue;
                t.dist = *dist;
                const std::string clock = jt.value("clock", "restart");
                if (clock == "restart") t.clock = ClockMode::restart;
                else if (clock == "continue") t.clock = ClockMode::resume;
                else errors.push_back(ctx + ": clock must be \"restart\" or \"continue\"");
                t.clock_id = jt.value("clock_id", "");
                if (t.clock == ClockMode::resume && t.clock_id.empty())
                    errors.push_back(ctx + ": clock \"continue\" requires a clock_id");
                if (t.from < 0 || t.to < 0) continue;
                m.transitions.push_back(t);
            }
        }
    }

    if (j.contains("artificial_renewal")) {
        const auto& jr = j.at("artificial_renewal");
        const std::string ctx = "artificial_renewal";
        if (!jr.is_object()) {
            errors.push_back(ctx + ": must be an object");
        } else {
            ArtificialRenewal r;
            r.from = state_of(jr, "from", ctx);
            r.to = state_of(jr, "to", ctx);
            if (jr.contains("rate")) {
                auto rate = field_number(jr, "rate", params, errors, ctx);
                if (rate) {
                    if (*rate <= 0.0)
                        errors.push_back(ctx + ": rate must be positive");
                    else
                        r.rate = *rate;
                }
            }
            if (r.from >= 0 && !m.states[r.from].absorbing)
                errors.push_back(ctx + ": \"from\" state must be absorbing");
            if (r.from >= 0 && r.to >= 0) m.renewal = r;
        }
    }

    if (j.contains("initial")) {
        if (!j.at("initial").is_string()) {
            errors.push_back("\"initial\" must be a state name");
        } else {
            const int idx = m.state_index(j.at("initial").get<std::string>());
            if (idx < 0)
                errors.push_back("initial: unknown state \"" +
                                 j.at("initial").get<std::string>() + "\"");
            else
                m.initial = idx;
        }
    }
    if (m.initial >= 0 && m.initial < m.n() && m.states[m.initial].absorbing)
        errors.push_back("initial state \"" + m.states[m.initial].name + "\" is absorbing");

    // structural checks
    for (size_t t = 0; t < m.transitions.size(); ++t) {
        const auto& tr = m.transitions[t];
        if (m.states[tr.from].absorbing)
            errors.push_back("absorbing state \"" + m.states[tr.from].name +
                             "\" has an outflow (" + m.transition_label(static_cast<int>(t)) + ")");
    }
    // continue clocks must be introduced by a restart transition somewhere
    for (size_t t = 0; t < m.transitions.size(); ++t) {
        const auto& tr = m.transitions[t];
        if (tr.clock != ClockMode::resume) continue;
        bool introduced = false;
        for (const auto& other : m.transitions)
            if (other.clock == ClockMode::restart && other.clock_id == tr.clock_id)
                introduced = true;
        if (!introduced)
            errors.push_back("clock_id \"" + tr.clock_id + "\" on " +
                             m.transition_label(static_cast<int>(t)) +
                             " is never introduced by a restart transition");
        if (m.states[tr.from].regeneration)
            errors.push_back("state \"" + m.states[tr.from].name +
                             "\" has a continue-clock outflow; mark it \"regeneration\": false");
    }

    if (!errors.empty()) throw ValidationError(errors);
    return m;
}

StateSpaceModel parse_model(const std::string& text) {
    return ModelDocument::from_text(text).resolve();
}

std::string print_model(const StateSpaceModel& model, int indent) {
    json j;
    j["states"] = json::array();
    for (const auto& s : model.states)
        j["states"].push_back({{"name", s.name},
                               {"absorbing", s.absorbing},
                               {"regeneration", s.regeneration}});
    j["transitions"] = json::array();
    for (const auto& t : model.transitions) {
        json jt{{"from", model.states[t.from].name}, {"to", model.states[t.to].name}};
        json jd;
        switch (t.dist.kind()) {
            case DistKind::exponential:
                jd = {{"kind", "exponential"}, {"rate", t.dist.rate()}};
                break;
            case DistKind::fixed_delay:
                jd = {{"kind", "fixed"}, {"delay", t.dist.delay()}};
                break;
            case DistKind::weibull:
                jd = {{"kind", "weibull"}, {"shape", t.dist.shape()}, {"scale", t.dist.scale()}};
                break;
            case DistKind::lognormal:
                jd = {{"kind", "lognormal"},
                      {"mean_log", t.dist.mean_log()},
                      {"sd_log", t.dist.sd_log()}};
                break;
        }
        jt["dist"] = jd;
        if (!t.clock_id.empty()) {
            jt["clock"] = t.clock == ClockMode::resume ? "continue" : "restart";
            jt["clock_id"] = t.clock_id;
        }
        j["transitions"].push_back(jt);
    }
    if (model.renewal) {
        j["artificial_renewal"] = {{"from", model.states[model.renewal->from].name},
                                   {"to", model.states[model.renewal->to].name},
                                   {"rate", model.renewal->rate}};
    }
    j["initial"] = model.states[model.initial].name;
    return j.dump(indent);
}

} // namespace smc
