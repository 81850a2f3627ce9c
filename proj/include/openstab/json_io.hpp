#pragma once

#include <json.hpp>

#include "openstab/integrate.hpp"
#include "openstab/metric.hpp"
#include "openstab/morphism.hpp"
#include "openstab/stability.hpp"
#include "openstab/system.hpp"

namespace openstab {

using Json = nlohmann::json;

/// Version string embedded in every serialized report.
const char* tool_version();

/// Non-finite numbers are written as the strings "inf", "-inf", "nan".
Json number(double v);
Json to_json(const State& x);
Json to_json(const DomainSpec& d);
Json to_json(const MetricSpec& m);
Json to_json(const IntegratorConfig& c);
Json to_json(const SamplingPlan& p);
Json to_json(const TrajectoryDistance& d);
Json to_json(const BoundednessReport& b);
Json to_json(const ProbeRecord& p);
Json to_json(const StabilityVerdict& v);
Json to_json(const RelatednessReport& r);
Json to_json(const OpennessReport& r);
Json to_json(const ModulusField& m);
Json to_json(const TransferCertificate& c);
Json to_json(const LinearOracleReport& r);
Json to_json(const CrossValidationReport& r);
Json to_json(const MetricEquivalenceReport& r);
Json summary_json(const Trajectory& t);

/// Parses "inf"/"-inf" strings as well as plain numbers.
double parse_number(const Json& j);
DomainSpec domain_from_json(const Json& j, std::size_t dimension);
MetricSpec metric_from_json(const Json& j);

}  // namespace openstab
