#pragma once

#include <array>
#include <string_view>
#include <utility>

// Models fitted on a real university student registry. The coefficients
// are used as golden fixtures for scoring and SQL generation. The row counts,
// R² values and PM3 accuracy bands depend on that private registry and cannot
// be reproduced by retraining; they are kept here as documentation only.
namespace gradpred::reference {

using Term = std::pair<std::string_view, double>;

inline constexpr std::array<Term, 7> kPm1Coefficients{{
    {"constant", -0.8304},
    {"gender_male", -0.2643},
    {"field_arts_and_design", -1.0129},
    {"field_engineering", -0.3026},
    {"no_credits_in_18m", -2.7880},
    {"sum_of_cr", 0.0101},
    {"distance_to_validity_end", 0.1925},
}};

inline constexpr std::array<Term, 5> kPm2Coefficients{{
    {"constant", -3.2970},
    {"gender_male", -0.3869},
    {"field_arts_and_design", -1.0453},
    {"no_credits_in_18m", -2.0927},
    {"sum_of_cr", 0.0188},
}};
inline constexpr std::array<std::string_view, 2> kPm2Dropped{"field_engineering", "distance_to_validity_end"};

inline constexpr std::array<Term, 5> kPm3Coefficients{{
    {"constant", 6.6596},
    {"gender_male", 0.3095},
    {"field_arts_and_design", 0.3532},
    {"sum_of_cr", -0.0132},
    {"distance_to_validity_end", 0.3408},
}};
inline constexpr std::array<std::string_view, 2> kPm3Dropped{"field_engineering", "no_credits_in_18m"};

// Training-set sizes and fit statistics (not reproducible).
inline constexpr std::size_t kPm1N = 8546;
inline constexpr std::size_t kPm2N = 10730;
inline constexpr std::size_t kPm3N = 4168;
inline constexpr double kPm1RSquared = 0.1456;  // pseudo-R², kind unreported
inline constexpr double kPm2RSquared = 0.4156;  // pseudo-R², kind unreported
inline constexpr double kPm3RSquared = 0.404;

// PM3 accuracy on its training data, percent of predictions within k semesters.
inline constexpr double kPm3SameSemesterPct = 19.5;
inline constexpr double kPm3Within1Pct = 54.9;
inline constexpr double kPm3Within2Pct = 78.9;

inline constexpr std::string_view kPm1ObservationDate = "2009-08-01";
inline constexpr std::string_view kPm2ObservationDate = "2013-08-01";

}  // namespace gradpred::reference
