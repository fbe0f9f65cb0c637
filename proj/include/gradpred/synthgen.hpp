#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradpred/errors.hpp"
#include "gradpred/featurize.hpp"
#include "gradpred/glm.hpp"
#include "gradpred/reference_models.hpp"
#include "gradpred/registry.hpp"
#include "gradpred/rng.hpp"

namespace gradpred::synth {

using CoefficientMap = std::map<std::string, double>;

struct GenConfig {
    std::size_t n_students = 1000;
    Date start_from{2006, 8, 2};
    Date start_to{2013, 7, 31};
    Date observation_date{2013, 8, 1};
    std::array<double, 3> field_weights{0.5, 0.2, 0.3};    // engineering, arts_and_design, business
    std::array<double, 3> gender_weights{0.45, 0.5, 0.05};  // female, male, unspecified
    double credit_rate = 27.0;     // mean ECTS per active semester
    double dropout_hazard = 0.04;  // per-semester probability of ceasing accrual
    CoefficientMap ground_truth_pm2 = reference_map(reference::kPm2Coefficients);
    CoefficientMap ground_truth_pm3 = reference_map(reference::kPm3Coefficients);
    double noise_sd = 1.0;  // semesters
    std::uint64_t seed = 20180601;

    template <typename Terms>
    static CoefficientMap reference_map(const Terms& terms) {
        CoefficientMap m;
        for (const auto& [name, value] : terms) m[std::string(name)] = value;
        return m;
    }

    void validate() const {
        if (n_students < 1) throw DataError("n_students must be at least 1");
        if (start_to < start_from) throw DataError("start_date_range is empty");
        auto check_weights = [](const std::array<double, 3>& w, const char* what) {
            double sum = 0.0;
            for (double v : w) {
                if (!(v >= 0.0 && v <= 1.0)) throw DataError(std::string(what) + " must lie in [0, 1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw DataError(std::string(what) + " must sum to 1");
        };
        check_weights(field_weights, "field_weights");
        check_weights(gender_weights, "gender_weights");
        if (!(credit_rate >= 0.0) || !std::isfinite(credit_rate)) throw DataError("credit_rate must be non-negative");
        if (!(dropout_hazard >= 0.0 && dropout_hazard <= 1.0)) throw DataError("dropout_hazard must lie in [0, 1]");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw DataError("noise_sd must be non-negative");
        for (const auto* m : {&ground_truth_pm2, &ground_truth_pm3})
            for (const auto& [name, value] : *m) {
                if (name != glm::kConstant && !parse_covariate(name))
                    throw DataError("ground truth has unknown term '" + name + "'");
                if (!std::isfinite(value)) throw DataError("ground truth coefficient '" + name + "' is not finite");
            }
    }
};

namespace detail {

inline std::array<double, 3> weights_from_json(const nlohmann::json& j, const std::array<const char*, 3>& keys,
                                               const char* what) {
    if (!j.is_object()) throw DataError(std::string(what) + " must be an object");
    for (const auto& [k, v] : j.items())
        if (k != keys[0] && k != keys[1] && k != keys[2]) throw DataError(std::string(what) + ": unknown key '" + k + "'");
    std::array<double, 3> w{};
    for (std::size_t i = 0; i < 3; ++i) w[i] = j.value(keys[i], 0.0);
    return w;
}

inline nlohmann::ordered_json weights_to_json(const std::array<double, 3>& w, const std::array<const char*, 3>& keys) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < 3; ++i) j[keys[i]] = w[i];
    return j;
}

inline constexpr std::array<const char*, 3> kFieldKeys{"engineering", "arts_and_design", "business"};
inline constexpr std::array<const char*, 3> kGenderKeys{"female", "male", "unspecified"};

}  // namespace detail

/// Reads a config; missing keys keep their defaults, unknown keys are errors.
inline GenConfig config_from_json(const nlohmann::json& j) {
    GenConfig c;
    try {
        if (!j.is_object()) throw DataError("generator config must be a JSON object");
        for (const auto& [key, v] : j.items()) {
            if (key == "n_students") {
                if (!v.is_number_integer() || v.get<long long>() < 0) throw DataError("n_students must be a non-negative integer");
                c.n_students = v.get<std::size_t>();
            } else if (key == "start_date_range") {
                c.start_from = Date::parse(v.at("from").get<std::string>());
                c.start_to = Date::parse(v.at("to").get<std::string>());
            } else if (key == "observation_date") {
                c.observation_date = Date::parse(v.get<std::string>());
            } else if (key == "field_weights") {
                c.field_weights = detail::weights_from_json(v, detail::kFieldKeys, "field_weights");
            } else if (key == "gender_weights") {
                c.gender_weights = detail::weights_from_json(v, detail::kGenderKeys, "gender_weights");
            } else if (key == "credit_rate") {
                c.credit_rate = v.get<double>();
            } else if (key == "dropout_hazard") {
                c.dropout_hazard = v.get<double>();
            } else if (key == "ground_truth_pm2") {
                c.ground_truth_pm2 = v.get<CoefficientMap>();
            } else if (key == "ground_truth_pm3") {
                c.ground_truth_pm3 = v.get<CoefficientMap>();
            } else if (key == "noise_sd") {
                c.noise_sd = v.get<double>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else {
                throw DataError("generator config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed generator config: ") + e.what());
    }
    c.validate();
    return c;
}

inline GenConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline nlohmann::ordered_json config_to_json(const GenConfig& c) {
    return {{"n_students", c.n_students},
            {"start_date_range", {{"from", c.start_from.str()}, {"to", c.start_to.str()}}},
            {"observation_date", c.observation_date.str()},
            {"field_weights", detail::weights_to_json(c.field_weights, detail::kFieldKeys)},
            {"gender_weights", detail::weights_to_json(c.gender_weights, detail::kGenderKeys)},
            {"credit_rate", c.credit_rate},
            {"dropout_hazard", c.dropout_hazard},
            {"ground_truth_pm2", c.ground_truth_pm2},
            {"ground_truth_pm3", c.ground_truth_pm3},
            {"noise_sd", c.noise_sd},
            {"seed", c.seed}};
}

/// z = sum of coefficient * covariate, "constant" contributing itself.
inline double ground_truth_predictor(const CoefficientMap& coefs, const FeatureRow& row) {
    double z = 0.0;
    for (const auto& [name, beta] : coefs) {
        if (name == glm::kConstant) {
            z += beta;
            continue;
        }
        z += beta * row.get(*parse_covariate(name)).value();
    }
    return z;
}

namespace detail {

inline std::size_t categorical(SplitMix64& rng, const std::array<double, 3>& w) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    for (std::size_t i = w.size(); i-- > 0;)
        if (w[i] > 0.0) return i;
    return 0;
}

inline Date uniform_date(SplitMix64& rng, const Date& from, const Date& to) {
    const auto span = static_cast<std::uint64_t>(from.days_until(to)) + 1;
    return from.add_days(static_cast<int>(rng.below(span)));
}

inline std::string make_id(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%07zu", prefix, i + 1);
    return buf;
}

}  // namespace detail

/// Events-first synthetic registry. For each student: credits accrue one
/// event per semester until dropout or the observation date; covariates are
/// then extracted from those events; the 4-year graduation label is a
/// Bernoulli draw from the PM2 ground truth; graduates are placed at the
/// start of the semester given by the PM3 ground truth plus Gaussian noise,
/// rounded and clamped to 1..8 semesters after the observation date.
/// All randomness comes from one splitmix64 stream seeded with `seed`.
inline Registry generate_population(const GenConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    const Date obs = config.observation_date;

    std::vector<Student> students;
    std::vector<StudyRight> rights;
    std::vector<CreditEvent> credits;
    students.reserve(config.n_students);
    rights.reserve(config.n_students);

    for (std::size_t i = 0; i < config.n_students; ++i) {
        Student s{detail::make_id('S', i), static_cast<Gender>(detail::categorical(rng, config.gender_weights))};
        StudyRight r;
        r.study_right_id = detail::make_id('R', i);
        r.student_id = s.student_id;
        r.right_type = RightType::combined_bsc_msc;
        r.field = static_cast<Field>(detail::categorical(rng, config.field_weights));
        r.start_date = detail::uniform_date(rng, config.start_from, config.start_to);

        // Accrual stops at the observation date or when the right expires.
        const Date last_day = std::min(obs, r.validity_end().add_days(-1));
        std::vector<CreditEvent> events;
        for (int sem = semester_ordinal(r.start_date); r.start_date <= last_day; ++sem) {
            Date lo = std::max(semester_start(sem), r.start_date);
            if (last_day < lo) break;
            if (rng.bernoulli(config.dropout_hazard)) break;
            const Date hi = std::min(semester_start(sem + 1).add_days(-1), last_day);
            const double amount = std::round(2.0 * config.credit_rate * (0.5 + rng.uniform())) / 2.0;
            const Date when = detail::uniform_date(rng, lo, hi);
            if (amount > 0.0) events.push_back({r.study_right_id, when, amount});
        }

        if (in_cohort(r, obs)) {
            const FeatureRow row = featurize_right(r, s, events, obs, std::nullopt);
            const double p = glm::detail::sigmoid(ground_truth_predictor(config.ground_truth_pm2, row));
            if (rng.bernoulli(p)) {
                const double t = ground_truth_predictor(config.ground_truth_pm3, row) + config.noise_sd * rng.normal();
                const int k = static_cast<int>(std::clamp(std::round(t), 1.0, 8.0));
                r.graduation_date = semester_start(semester_ordinal(obs) + k);
            }
        }

        credits.insert(credits.end(), events.begin(), events.end());
        students.push_back(std::move(s));
        rights.push_back(std::move(r));
    }
    return Registry::create(std::move(students), std::move(rights), std::move(credits));
}

inline Registry generate_population(const GenConfig& config) { return generate_population(config, config.seed); }

}  // namespace gradpred::synth
