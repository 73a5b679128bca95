#pragma once

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/network.hpp"

#include <json.hpp>

namespace rmdn {

nlohmann::json to_json(const MdnConfig& config);
/// Missing keys keep the defaults of `base`.
MdnConfig config_from_json(const nlohmann::json& j, MdnConfig base = {});

nlohmann::json to_json(const Normalizer& nz);
Normalizer normalizer_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CcOdpFit& fit);
CcOdpFit ccodp_from_json(const nlohmann::json& j);

}  // namespace rmdn
