#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aodret {

// Evaluator of simulated top-of-atmosphere radiances for one pixel state
// (tau, theta). Implementations are immutable after construction and safe for
// concurrent evaluation.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;

    virtual int channels() const = 0;
    virtual int components() const = 0;
    virtual double tau_min() const = 0;
    virtual double tau_max() const = 0;

    // Writes channels() radiances; throws std::domain_error when tau is
    // outside [tau_min, tau_max] or theta is off the simplex.
    virtual void eval(double tau, std::span<const double> theta,
                      std::span<double> out) const = 0;

    std::vector<double> eval(double tau, std::span<const double> theta) const {
        std::vector<double> out(channels());
        eval(tau, theta, out);
        return out;
    }
};

// Tolerance for accepting theta as a point on the simplex.
inline constexpr double kSimplexTol = 1e-8;

void check_on_simplex(std::span<const double> theta);

// Analytic stand-in for a radiative-transfer lookup: per channel c,
//   L_c = S_c * exp(-tau*k_c(theta)) + A_c(theta) * (1 - exp(-tau*k_c(theta)))
// with k_c(theta) = sum_m theta_m * E[c][m] and A_c = sum_m theta_m * P[c][m].
struct SurrogateParams {
    int channels = 36;
    int components = 4;
    double tau_lo = 0.0;
    double tau_hi = 3.0;
    std::vector<double> extinction; // channels x components, row-major
    std::vector<double> saturation; // channels x components, row-major
    std::vector<double> surface;    // channels

    // Deterministic default parameter set (9 angles x 4 bands when C = 36).
    static SurrogateParams defaults(int channels = 36, int components = 4);

    void validate() const;
};

class SurrogateModel final : public ForwardModel {
public:
    using ForwardModel::eval;

    explicit SurrogateModel(SurrogateParams params);

    int channels() const override { return params_.channels; }
    int components() const override { return params_.components; }
    double tau_min() const override { return params_.tau_lo; }
    double tau_max() const override { return params_.tau_hi; }
    void eval(double tau, std::span<const double> theta,
              std::span<double> out) const override;

    const SurrogateParams& params() const { return params_; }

private:
    SurrogateParams params_;
};

// Pure-component radiances tabulated on a tau grid; mixtures are linear in
// theta between the per-component curves, and tau is interpolated linearly
// between bracketing nodes.
class RadianceTable {
public:
    RadianceTable(std::vector<double> tau_nodes, int channels, int components,
                  std::vector<double> values,
                  std::vector<std::string> component_labels = {});

    int channels() const { return channels_; }
    int components() const { return components_; }
    std::span<const double> tau_nodes() const { return tau_nodes_; }
    const std::vector<std::string>& component_labels() const { return labels_; }

    double value(int node, int component, int channel) const {
        return values_[(static_cast<std::size_t>(node) * components_ + component) *
                           channels_ + channel];
    }
    std::span<const double> values() const { return values_; }

private:
    std::vector<double> tau_nodes_;
    int channels_;
    int components_;
    std::vector<double> values_; // node-major, then component, then channel
    std::vector<std::string> labels_;
};

class TableModel final : public ForwardModel {
public:
    using ForwardModel::eval;

    explicit TableModel(RadianceTable table);

    int channels() const override { return table_.channels(); }
    int components() const override { return table_.components(); }
    double tau_min() const override { return table_.tau_nodes().front(); }
    double tau_max() const override { return table_.tau_nodes().back(); }
    void eval(double tau, std::span<const double> theta,
              std::span<double> out) const override;

    const RadianceTable& table() const { return table_; }

private:
    RadianceTable table_;
};

RadianceTable build_table_from_surrogate(const SurrogateParams& params,
                                         std::span<const double> tau_nodes);

// Text table format: self-describing header, one radiance per line in
// node-major/component/channel order, terminated by a checksum line.
// Values are written in shortest round-trip decimal form, so
// write(read(file)) reproduces the file byte for byte.
void write_radiance_table(const RadianceTable& table, const std::string& path);
RadianceTable read_radiance_table(const std::string& path);

} // namespace aodret
