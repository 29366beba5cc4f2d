#pragma once
#include <string>

#include "mofa/interpreter.h"
#include "mofa/ir.h"
#include "mofa/tensor.h"

namespace mofa {

// randomized cross-check cases shared by `verify` and the acceptance suite
struct OracleCase {
  LayerKind kind;
  Dims4 shape;
  std::string name;
};

// any single-input layer kind, shape <= 32x32, channels <= 128, with a cap on
// per-case multiplies so large sweeps stay fast
OracleCase random_oracle_case(Rng& rng);

// a pconv (or pdwconv) case for the slice-semantics check
OracleCase random_partial_case(Rng& rng, bool pdw);

// empty string on success, human-readable mismatch description on failure
std::string check_oracle_case(const OracleCase& c, std::uint64_t seed);
std::string check_partial_case(const OracleCase& c, std::uint64_t seed);

}  // namespace mofa
