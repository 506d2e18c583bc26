#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spot/selector.hpp"

namespace spot {

/// Class semantic embedding, unit Euclidean norm.
struct AttributeVector {
    int class_id = 0;
    std::vector<double> attributes;
};

void validate_attribute(const AttributeVector& attr);

enum class CorruptionMode {
    off_manifold_noise,  // candidate replaced by white noise at data scale
    wrong_class_mean,    // candidate centered on another class's projected mean
};

CorruptionMode corruption_mode_from_string(const std::string& s);
std::string to_string(CorruptionMode mode);

/// Deterministic stand-in for a trained feature-generating network. The
/// corruption knobs give the test suite per-candidate ground truth that no
/// real generator provides.
struct GeneratorSpec {
    std::size_t feature_dim = 16;
    double noise_scale = 0.1;
    double corruption_rate = 0.0;
    CorruptionMode corruption_mode = CorruptionMode::wrong_class_mean;
    std::uint64_t seed = 0;
    // Candidate wrong-class centers. For wrong_class_mean corruption a decoy
    // with a different class_id is drawn uniformly; with no usable decoy a
    // fresh random unit attribute stands in for the other class.
    std::vector<AttributeVector> decoy_attributes;
};

/// n candidates labeled attr.class_id. Clean candidates are
/// projection(attributes) + Gaussian(noise_scale); corrupted ones follow
/// corruption_mode. generation_index is emission order.
CandidatePool generate(const GeneratorSpec& spec, const AttributeVector& attr,
                       const Matrix& projection, std::size_t n, Rng& rng);

/// Concatenation of generate() over all classes with globally re-indexed
/// generation order. Each class consumes an independently derived substream.
CandidatePool generate_pool(const GeneratorSpec& spec, const std::vector<AttributeVector>& attrs,
                            const Matrix& projection, std::size_t per_class, Rng& rng);

/// projection is d_attr x feature_dim; returns the 1 x feature_dim center.
Matrix project_attribute(const AttributeVector& attr, const Matrix& projection);

}  // namespace spot
