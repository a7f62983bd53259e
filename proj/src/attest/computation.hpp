#ifndef PVM_ATTEST_COMPUTATION_HPP
#define PVM_ATTEST_COMPUTATION_HPP

#include <functional>
#include <vector>

#include "support/bytes.hpp"

namespace pvm::attest {

// Computation attestation: a backend is trusted only if it reproduces
// the reference kernel's outputs on canonical inputs within an epsilon
// bound. The reference kernel is an 8x8 double-precision matrix-vector
// product with seeded weights, summed in ascending index order.

inline constexpr size_t kKernelDim = 8;
inline constexpr double kDefaultEpsilon = 1e-6;

using Vector = std::vector<double>;
using Backend = std::function<std::vector<Vector>(const std::vector<Vector>&)>;

// Seeded deterministically; identical on every platform.
std::vector<double> reference_weights();       // row-major, 64 entries
std::vector<Vector> canonical_inputs();        // fixed probe vectors
Vector reference_apply(const Vector& input);   // ascending-index summation
std::vector<Vector> reference_outputs();

enum class Verdict { Pass, Fail };

struct AttestationVerdict {
  Verdict verdict;
  double max_relative_error;
  double epsilon;
  // Signable summary for embedding in a quote payload.
  Digest32 digest() const;
};

// Pass iff |y - y_ref| <= epsilon * max(1, |y_ref|) for every element.
// Throws ShapeMismatch when the backend's output shape differs.
AttestationVerdict attest_computation(const Backend& backend,
                                      const std::vector<Vector>& inputs,
                                      const std::vector<Vector>& reference,
                                      double epsilon = kDefaultEpsilon);

}  // namespace pvm::attest

#endif
