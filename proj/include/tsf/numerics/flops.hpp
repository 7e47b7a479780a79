#pragma once

namespace tsf::numerics {

/// Scoped floating-point operation tally for the current thread.
///
/// Convention: one multiply-accumulate counts as 2 FLOPs and each bias
/// addition as 1. Convolutions, linear maps, batched matrix products,
/// attention score/mixing products, wavelet filtering and graph propagation
/// are counted; activations, normalisation and elementwise arithmetic are not.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;

  double total() const { return total_; }

  /// Adds to the innermost active counter, if any.
  static void record(double flops);

 private:
  double total_ = 0.0;
  FlopCounter* outer_;
};

}  // namespace tsf::numerics
