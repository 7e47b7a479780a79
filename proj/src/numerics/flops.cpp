#include "tsf/numerics/flops.hpp"

namespace tsf::numerics {

namespace {
thread_local FlopCounter* g_active = nullptr;
}

FlopCounter::FlopCounter() : outer_(g_active) { g_active = this; }

FlopCounter::~FlopCounter() {
  g_active = outer_;
  if (outer_) outer_->total_ += total_;
}

void FlopCounter::record(double flops) {
  if (g_active) g_active->total_ += flops;
}

}  // namespace tsf::numerics
