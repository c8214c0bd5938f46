#pragma once

#include <string>

#include <json.hpp>

#include "picmatch/caliper.hpp"
#include "picmatch/effect.hpp"
#include "picmatch/index_model.hpp"
#include "picmatch/matcher.hpp"

namespace picmatch {

// Round-trippable decimal rendering ("%.17g"); identical across runs.
std::string format_double(double v);

nlohmann::ordered_json fit_report(const IndexFit& f, CovEstimator est);
nlohmann::ordered_json caliper_report(const CaliperContext& ctx);
nlohmann::ordered_json match_report(const MatchResult& m,
                                    const EligibilityGraph& g);
nlohmann::ordered_json effect_report(const EffectEstimate& e, WeightKind w);

std::string match_csv(const MatchResult& m);
std::string effect_csv(const EffectEstimate& e);

void write_text(const std::string& path, const std::string& content);

}  // namespace picmatch
