#include "attest/computation.hpp"

#include <cmath>

#include "support/crypto.hpp"

namespace pvm::attest {

namespace {
constexpr uint64_t kWeightSeed = 0x70766d6b65726e65ull;
constexpr uint64_t kInputSeed = 0x70766d696e707574ull;
constexpr size_t kProbeCount = 4;

double signed_unit(SplitMix64& rng) { return rng.unit() * 2.0 - 1.0; }
}  // namespace

std::vector<double> reference_weights() {
  SplitMix64 rng(kWeightSeed);
  std::vector<double> w(kKernelDim * kKernelDim);
  for (double& v : w) v = signed_unit(rng);
  return w;
}

std::vector<Vector> canonical_inputs() {
  SplitMix64 rng(kInputSeed);
  std::vector<Vector> inputs(kProbeCount, Vector(kKernelDim));
  for (auto& v : inputs)
    for (double& x : v) x = signed_unit(rng);
  return inputs;
}

Vector reference_apply(const Vector& input) {
  static const std::vector<double> weights = reference_weights();
  Vector out(kKernelDim, 0.0);
  for (size_t row = 0; row < kKernelDim; row++) {
    double acc = 0.0;
    for (size_t col = 0; col < kKernelDim; col++)
      acc += weights[row * kKernelDim + col] * input[col];
    out[row] = acc;
  }
  return out;
}

std::vector<Vector> reference_outputs() {
  std::vector<Vector> out;
  for (const Vector& v : canonical_inputs()) out.push_back(reference_apply(v));
  return out;
}

Digest32 AttestationVerdict::digest() const {
  ByteWriter w;
  w.u8(verdict == Verdict::Pass ? 1 : 0);
  w.f64(max_relative_error);
  w.f64(epsilon);
  return crypto::sha256(w.data());
}

AttestationVerdict attest_computation(const Backend& backend,
                                      const std::vector<Vector>& inputs,
                                      const std::vector<Vector>& reference,
                                      double epsilon) {
  if (inputs.size() != reference.size())
    fail(PVM_ERR_SHAPE_MISMATCH, "input and reference counts differ");
  std::vector<Vector> outputs = backend(inputs);
  if (outputs.size() != reference.size())
    fail(PVM_ERR_SHAPE_MISMATCH, "backend produced a different output count");

  double worst = 0.0;
  bool pass = true;
  for (size_t i = 0; i < outputs.size(); i++) {
    if (outputs[i].size() != reference[i].size())
      fail(PVM_ERR_SHAPE_MISMATCH, "backend output " + std::to_string(i) +
                                       " has a different length");
    for (size_t j = 0; j < outputs[i].size(); j++) {
      double denom = std::max(1.0, std::fabs(reference[i][j]));
      double rel = std::fabs(outputs[i][j] - reference[i][j]) / denom;
      worst = std::max(worst, rel);
      if (!(rel <= epsilon)) pass = false;
    }
  }
  return {pass ? Verdict::Pass : Verdict::Fail, worst, epsilon};
}

}  // namespace pvm::attest
