#pragma once

#include <cstdint>
#include <vector>

#include "sppb/cohort.hpp"
#include "sppb/schema.hpp"

namespace sppb {

/// Generates a seeded cohort for pipeline testing without licensed data.
/// Every participant appears in the three measured waves. A latent health
/// burden rises with age and between waves and drives the timed tests, grip
/// strength, self-rated health and functional difficulties, so current total
/// score, age and grip strength are recoverable as the dominant predictors
/// of the future score. About 10% of ordinary feature cells are missing,
/// timed assessments much more rarely. Deterministic given the seed;
/// per-participant streams make the output independent of generation order.
std::vector<ParticipantWaveRecord> generate_synthetic_cohort(
    std::uint64_t seed, std::size_t n_participants,
    const FeatureSchema& schema = default_schema());

}  // namespace sppb
