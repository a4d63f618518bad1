#pragma once

#include "hds/propagate.hpp"

#include <string>

namespace hds::record {

inline constexpr const char* kToolVersion = HDS_VERSION;

// CSV body: axis column, then <name>_mean and <name>_sem per trace, %.17g throughout.
std::string csv_text(const propagate::RunRecord& record);
nlohmann::json sidecar(const propagate::RunRecord& record);

// Writes <path>.csv and <path>.json. The parent directory must exist; both files are
// staged next to their targets and renamed into place, so a failure leaves neither behind.
void emit(const propagate::RunRecord& record, const std::string& path);

}  // namespace hds::record
