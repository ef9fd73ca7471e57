#include "aodret/forward_model.hpp"

#include "aodret/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aodret {

void check_on_simplex(std::span<const double> theta) {
    double sum = 0.0;
    for (double t : theta) {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw std::domain_error("theta has a negative or non-finite component");
        sum += t;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        throw std::domain_error("theta does not sum to 1");
}

SurrogateParams SurrogateParams::defaults(int channels, int components) {
    SurrogateParams p;
    p.channels = channels;
    p.components = components;
    p.extinction.resize(static_cast<std::size_t>(channels) * components);
    p.saturation.resize(static_cast<std::size_t>(channels) * components);
    p.surface.resize(channels);

    // Channel structure follows the instrument layout (bands minor, angles
    // major when C = 36). The common-mode level across components sets the
    // tau sensitivity; the small cross-component ripple sets how strongly the
    // mixture is identified.
    for (int c = 0; c < channels; ++c) {
        const int band = c % 4;
        const int angle = c / 4;
        p.surface[c] = 0.006 + 0.002 * band + 0.0008 * angle;
        const double ext_level = 1.10 * (1.0 + 0.20 * std::sin(0.7 * c));
        const double sat_level = 0.30 + 0.08 * std::cos(0.35 * c);
        for (int m = 0; m < components; ++m) {
            const std::size_t i = static_cast<std::size_t>(c) * components + m;
            p.extinction[i] =
                ext_level * (1.0 + 0.09 * std::sin(0.9 * c + 2.1 * m));
            p.saturation[i] =
                sat_level * (1.0 + 0.075 * std::sin(1.1 * c + 1.7 * m + 0.5));
        }
    }
    p.validate();
    return p;
}

void SurrogateParams::validate() const {
    if (channels < 1 || components < 1)
        throw std::invalid_argument("surrogate: channels/components must be positive");
    if (!(tau_lo < tau_hi))
        throw std::invalid_argument("surrogate: empty tau support");
    const std::size_t cm = static_cast<std::size_t>(channels) * components;
    if (extinction.size() != cm || saturation.size() != cm ||
        surface.size() != static_cast<std::size_t>(channels))
        throw std::invalid_argument("surrogate: parameter dimensions mismatch");
    for (double e : extinction)
        if (!(e > 0.0) || !std::isfinite(e))
            throw std::invalid_argument("surrogate: extinction must be positive finite");
    for (double a : saturation)
        if (!(a > 0.0) || !std::isfinite(a))
            throw std::invalid_argument("surrogate: saturation must be positive finite");
    for (double s : surface)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw std::invalid_argument("surrogate: surface must be nonnegative finite");
}

SurrogateModel::SurrogateModel(SurrogateParams params) : params_(std::move(params)) {
    params_.validate();
}

void SurrogateModel::eval(double tau, std::span<const double> theta,
                          std::span<double> out) const {
    if (!(tau >= params_.tau_lo && tau <= params_.tau_hi))
        throw std::domain_error("surrogate: tau outside support");
    if (theta.size() != static_cast<std::size_t>(params_.components) ||
        out.size() != static_cast<std::size_t>(params_.channels))
        throw std::invalid_argument("surrogate: bad span sizes");
    check_on_simplex(theta);

    const int M = params_.components;
    for (int c = 0; c < params_.channels; ++c) {
        const double* E = &params_.extinction[static_cast<std::size_t>(c) * M];
        const double* A = &params_.saturation[static_cast<std::size_t>(c) * M];
        double k = 0.0, a = 0.0;
        for (int m = 0; m < M; ++m) {
            k += theta[m] * E[m];
            a += theta[m] * A[m];
        }
        const double att = std::exp(-tau * k);
        out[c] = params_.surface[c] * att + a * (1.0 - att);
    }
}

RadianceTable::RadianceTable(std::vector<double> tau_nodes, int channels,
                             int components, std::vector<double> values,
                             std::vector<std::string> component_labels)
    : tau_nodes_(std::move(tau_nodes)), channels_(channels),
      components_(components), values_(std::move(values)),
      labels_(std::move(component_labels)) {
    if (tau_nodes_.size() < 2)
        throw std::invalid_argument("radiance table: need at least 2 tau nodes");
    for (std::size_t i = 1; i < tau_nodes_.size(); ++i)
        if (!(tau_nodes_[i] > tau_nodes_[i - 1]))
            throw std::invalid_argument("radiance table: tau nodes must be strictly increasing");
    if (channels_ < 1 || components_ < 1)
        throw std::invalid_argument("radiance table: bad dimensions");
    if (values_.size() != tau_nodes_.size() * components_ * channels_)
        throw std::invalid_argument("radiance table: value count mismatch");
    for (double v : values_)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("radiance table: values must be positive finite");
    if (labels_.empty())
        for (int m = 0; m < components_; ++m)
            labels_.push_back("component" + std::to_string(m + 1));
    if (labels_.size() != static_cast<std::size_t>(components_))
        throw std::invalid_argument("radiance table: label count mismatch");
}

TableModel::TableModel(RadianceTable table) : table_(std::move(table)) {}

void TableModel::eval(double tau, std::span<const double> theta,
                      std::span<double> out) const {
    const auto nodes = table_.tau_nodes();
    if (!(tau >= nodes.front() && tau <= nodes.back()))
        throw std::domain_error("table: tau outside grid (no extrapolation)");
    if (theta.size() != static_cast<std::size_t>(table_.components()) ||
        out.size() != static_cast<std::size_t>(table_.channels()))
        throw std::invalid_argument("table: bad span sizes");
    check_on_simplex(theta);

    // Bracketing interval; exact hits on a node use weight 0 on the upper node.
    auto it = std::upper_bound(nodes.begin(), nodes.end(), tau);
    std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    if (hi == nodes.size()) hi = nodes.size() - 1;
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double w = (tau - nodes[lo]) / (nodes[hi] - nodes[lo]);

    const int M = table_.components();
    for (int c = 0; c < table_.channels(); ++c) {
        double acc = 0.0;
        for (int m = 0; m < M; ++m) {
            const double pure = (1.0 - w) * table_.value(static_cast<int>(lo), m, c) +
                                w * table_.value(static_cast<int>(hi), m, c);
            acc += theta[m] * pure;
        }
        out[c] = acc;
    }
}

RadianceTable build_table_from_surrogate(const SurrogateParams& params,
                                         std::span<const double> tau_nodes) {
    params.validate();
    if (tau_nodes.size() < 2)
        throw std::invalid_argument("table build: need at least 2 nodes");
    SurrogateModel fm(params);
    const int C = params.channels;
    const int M = params.components;
    std::vector<double> values(tau_nodes.size() * M * C);
    std::vector<double> theta(M, 0.0);
    std::vector<double> radiances(C);
    for (std::size_t n = 0; n < tau_nodes.size(); ++n) {
        for (int m = 0; m < M; ++m) {
            std::fill(theta.begin(), theta.end(), 0.0);
            theta[m] = 1.0;
            fm.eval(tau_nodes[n], theta, radiances);
            for (int c = 0; c < C; ++c)
                values[(n * M + m) * C + c] = radiances[c];
        }
    }
    return RadianceTable(std::vector<double>(tau_nodes.begin(), tau_nodes.end()),
                         C, M, std::move(values));
}

void write_radiance_table(const RadianceTable& table, const std::string& path) {
    std::ostringstream body;
    body << "aodret-table v1\n";
    body << "channels " << table.channels() << "\n";
    body << "components " << table.components() << "\n";
    body << "labels";
    for (const auto& l : table.component_labels()) body << " " << l;
    body << "\n";
    body << "tau_nodes " << table.tau_nodes().size();
    for (double t : table.tau_nodes()) body << " " << format_double(t);
    body << "\n";
    body << "values\n";
    for (double v : table.values()) body << format_double(v) << "\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const std::string payload = body.str();
    out << payload;
    out << "checksum fnv1a64 " << to_hex(fnv1a64(payload)) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

} // namespace

RadianceTable read_radiance_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);

    std::ostringstream payload;
    std::string line = expect_line(in, "table magic");
    if (line != "aodret-table v1")
        throw std::runtime_error(path + ": not an aodret-table v1 file");
    payload << line << "\n";

    auto field = [&](const char* key) {
        std::string l = expect_line(in, key);
        payload << l << "\n";
        auto toks = split_ws(l);
        if (toks.empty() || toks[0] != key)
            throw std::runtime_error(path + ": expected '" + key + "' line");
        return toks;
    };

    const int channels = static_cast<int>(parse_int(field("channels").at(1)));
    const int components = static_cast<int>(parse_int(field("components").at(1)));
    auto label_toks = field("labels");
    std::vector<std::string> labels(label_toks.begin() + 1, label_toks.end());
    auto node_toks = field("tau_nodes");
    const std::size_t n_nodes = static_cast<std::size_t>(parse_int(node_toks.at(1)));
    if (node_toks.size() != n_nodes + 2)
        throw std::runtime_error(path + ": tau node count mismatch");
    std::vector<double> nodes;
    nodes.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i)
        nodes.push_back(parse_double(node_toks[i + 2]));

    line = expect_line(in, "values header");
    payload << line << "\n";
    if (line != "values") throw std::runtime_error(path + ": expected 'values' line");

    const std::size_t count = n_nodes * components * channels;
    std::vector<double> values;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        line = expect_line(in, "radiance value");
        payload << line << "\n";
        values.push_back(parse_double(line));
    }

    line = expect_line(in, "checksum");
    auto toks = split_ws(line);
    if (toks.size() != 3 || toks[0] != "checksum" || toks[1] != "fnv1a64")
        throw std::runtime_error(path + ": malformed checksum line");
    if (toks[2] != to_hex(fnv1a64(payload.str())))
        throw std::runtime_error(path + ": checksum mismatch");

    return RadianceTable(std::move(nodes), channels, components, std::move(values),
                         std::move(labels));
}

} // namespace aodret
