#pragma once

#include <functional>
#include <string_view>

namespace xferod {

using WarningSink = std::function<void(std::string_view)>;

/// Routes a non-fatal diagnostic (skipped object, degenerate target column,
/// pseudo-inverse fallback) to the active sink. Default sink is stderr.
void warn(std::string_view message);

/// Replaces the process-wide sink and returns the previous one. Passing an
/// empty function silences warnings.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace xferod
