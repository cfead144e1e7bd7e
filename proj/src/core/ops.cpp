#include "mtm/core/ops.hpp"

namespace mtm::ops {

namespace {
bool g_debug_checks = false;
}

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

}  // namespace mtm::ops
