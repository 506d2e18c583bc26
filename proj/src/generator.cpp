#include "spot/generator.hpp"

#include <cmath>

#include "spot/errors.hpp"

namespace spot {

void validate_attribute(const AttributeVector& attr) {
    if (attr.attributes.empty()) throw InputError("attribute vector is empty");
    double norm2 = 0.0;
    for (double a : attr.attributes) norm2 += a * a;
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
        throw InputError("attribute vector for class " + std::to_string(attr.class_id) +
                         " is not unit-norm");
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
    if (s == "off-manifold-noise") return CorruptionMode::off_manifold_noise;
    if (s == "wrong-class-mean") return CorruptionMode::wrong_class_mean;
    throw ConfigError("unknown corruption mode '" + s + "'");
}

std::string to_string(CorruptionMode mode) {
    return mode == CorruptionMode::off_manifold_noise ? "off-manifold-noise"
                                                      : "wrong-class-mean";
}

Matrix project_attribute(const AttributeVector& attr, const Matrix& projection) {
    if (projection.rows != attr.attributes.size())
        throw ShapeError("project_attribute: projection " + projection.shape_str() +
                         " vs attribute dim " + std::to_string(attr.attributes.size()));
    Matrix row(1, projection.rows);
    row.data = attr.attributes;
    return matmul(row, projection);
}

namespace {

AttributeVector random_unit_attribute(std::size_t dim, Rng& rng) {
    AttributeVector a;
    a.class_id = -1;
    a.attributes.resize(dim);
    double norm2 = 0.0;
    for (double& x : a.attributes) {
        x = rng.normal();
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : a.attributes) x *= inv;
    return a;
}

double rms(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data) s += x * x;
    return std::sqrt(s / static_cast<double>(m.size()));
}

}  // namespace

CandidatePool generate(const GeneratorSpec& spec, const AttributeVector& attr,
                       const Matrix& projection, std::size_t n, Rng& rng) {
    if (n == 0) throw InputError("generate: need at least one candidate");
    if (spec.corruption_rate < 0.0 || spec.corruption_rate > 1.0)
        throw ConfigError("generate: corruption_rate outside [0,1]");
    validate_attribute(attr);
    if (projection.cols != spec.feature_dim)
        throw ShapeError("generate: projection " + projection.shape_str() +
                         " vs feature_dim " + std::to_string(spec.feature_dim));
    const Matrix clean_center = project_attribute(attr, projection);

    CandidatePool pool;
    pool.features = Matrix(n, spec.feature_dim);
    pool.class_labels.assign(n, attr.class_id);
    pool.generation_index.resize(n);
    pool.corrupted.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        pool.generation_index[i] = i;
        const bool corrupt = rng.uniform01() < spec.corruption_rate;
        pool.corrupted[i] = corrupt ? 1 : 0;
        if (!corrupt) {
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                pool.features(i, j) = clean_center(0, j) + rng.normal(0.0, spec.noise_scale);
        } else if (spec.corruption_mode == CorruptionMode::wrong_class_mean) {
            std::vector<std::size_t> usable;
            for (std::size_t d = 0; d < spec.decoy_attributes.size(); ++d)
                if (spec.decoy_attributes[d].class_id != attr.class_id) usable.push_back(d);
            Matrix center;
            if (usable.empty()) {
                center = project_attribute(
                    random_unit_attribute(projection.rows, rng), projection);
            } else {
                center = project_attribute(
                    spec.decoy_attributes[usable[rng.uniform_index(usable.size())]], projection);
            }
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                pool.features(i, j) = center(0, j) + rng.normal(0.0, spec.noise_scale);
        } else {
            const double sigma = 3.0 * (rms(clean_center) + spec.noise_scale);
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                pool.features(i, j) = rng.normal(0.0, sigma);
        }
    }
    check_finite(pool.features, "generated candidates");
    return pool;
}

CandidatePool generate_pool(const GeneratorSpec& spec, const std::vector<AttributeVector>& attrs,
                            const Matrix& projection, std::size_t per_class, Rng& rng) {
    if (attrs.empty()) throw InputError("generate_pool: no attribute vectors given");
    const std::uint64_t base = rng.next_u64();

    CandidatePool pool;
    pool.features = Matrix(attrs.size() * per_class, spec.feature_dim);
    std::size_t row = 0;
    for (std::size_t c = 0; c < attrs.size(); ++c) {
        Rng sub(Rng::derive(base, static_cast<std::uint64_t>(c)));
        const CandidatePool part = generate(spec, attrs[c], projection, per_class, sub);
        for (std::size_t i = 0; i < part.size(); ++i, ++row) {
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                pool.features(row, j) = part.features(i, j);
            pool.class_labels.push_back(part.class_labels[i]);
            pool.corrupted.push_back(part.corrupted[i]);
            pool.generation_index.push_back(row);
        }
    }
    return pool;
}

}  // namespace spot
