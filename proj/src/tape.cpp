#include "ecgdg/tape.hpp"

#include <atomic>

namespace ecgdg::nn {

namespace {
std::atomic<bool> g_finite_checks{false};
}

void set_finite_checks(bool on) { g_finite_checks.store(on); }
bool finite_checks() { return g_finite_checks.load(); }

}  // namespace ecgdg::nn
