#include "chemputer/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "chemputer/rng.hpp"

namespace chemputer::assembly {

DetectabilitySpec DetectabilitySpec::constant(double phi, int assembly_index, double eps) {
    if (assembly_index < 0) throw PreconditionError("assembly index must be >= 0");
    return DetectabilitySpec{phi, std::vector<double>(static_cast<std::size_t>(assembly_index), eps)};
}

void DetectabilitySpec::validate() const {
    if (!(phi > 0.0)) throw PreconditionError("phi must be > 0");
    for (double e : eps) {
        if (!(e >= 0.0 && e < 1.0)) throw PreconditionError("per-step error must lie in [0, 1)");
    }
}

NMinResult n_min(const DetectabilitySpec& spec) {
    spec.validate();
    double fraction = 1.0;
    for (double e : spec.eps) fraction *= (1.0 - e);
    if (fraction == 0.0) return {std::numeric_limits<double>::infinity(), true};
    double v = spec.phi / fraction;
    return {v, std::isinf(v)};
}

double survival_fraction(double eps, int assembly_index) {
    if (!(eps >= 0.0 && eps < 1.0)) throw PreconditionError("eps must lie in [0, 1)");
    if (assembly_index < 0) throw PreconditionError("assembly index must be >= 0");
    return std::pow(1.0 - eps, assembly_index);
}

double max_error_for(double phi, int assembly_index, double n_available) {
    if (!(phi > 0.0)) throw PreconditionError("phi must be > 0");
    if (assembly_index < 1) throw PreconditionError("assembly index must be >= 1");
    if (n_available < phi) {
        throw NotDetectable("available copies " + format_double(n_available) +
                            " below detection threshold " + format_double(phi));
    }
    return 1.0 - std::pow(phi / n_available, 1.0 / assembly_index);
}

AssemblyBounds assembly_bounds(std::int64_t bonds) {
    if (bonds < 2) throw PreconditionError("assembly bounds need at least 2 bonds");
    int lo = 0;
    while ((std::int64_t{1} << lo) < bonds) ++lo;
    return {lo, static_cast<int>(bonds - 1)};
}

Realisability check_realisable(bool stable, double produced_perfect, double phi) {
    Realisability r;
    if (!stable) r.failed.emplace_back("unstable");
    if (!(produced_perfect >= phi)) r.failed.emplace_back("below_detection_threshold");
    r.realisable = r.failed.empty();
    return r;
}

void MonteCarloConfig::validate() const {
    if (!(n0 > 0.0)) throw PreconditionError("n0 must be > 0");
    if (eps0.empty()) throw PreconditionError("eps0 list is empty");
    for (double e : eps0) {
        if (!(e > 0.0 && e < 1.0)) throw PreconditionError("eps0 values must lie in (0, 1)");
    }
    if (systematic_sd < 0.0) throw PreconditionError("systematic_sd must be >= 0");
    if (ai_max < 1) throw PreconditionError("ai_max must be >= 1");
    if (trajectories < 1) throw PreconditionError("trajectories must be >= 1");
}

double baseline_error(double eps0, double k_growth, int step) {
    return eps0 * std::exp(k_growth * (step - 1));
}

namespace {

// Neumaier compensated summation.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace

MCResult monte_carlo(const MonteCarloConfig& config) {
    config.validate();
    const std::size_t rows = config.eps0.size();
    const auto steps = static_cast<std::size_t>(config.ai_max);

    std::vector<std::vector<double>> baseline(rows, std::vector<double>(steps));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t s = 0; s < steps; ++s) {
            baseline[r][s] = baseline_error(config.eps0[r], config.k_growth, static_cast<int>(s) + 1);
        }
    }

    std::vector<std::vector<CompensatedSum>> sums(rows, std::vector<CompensatedSum>(steps));
    std::vector<double> systematic(steps);
    for (int t = 0; t < config.trajectories; ++t) {
        // Every eps0 row of a trajectory shares the same systematic draws.
        Rng rng(derive_seed(config.seed, "mc.trajectory", static_cast<std::uint64_t>(t)));
        if (config.redraw_systematic_per_step) {
            for (auto& e : systematic) e = config.systematic_sd * rng.normal();
        } else {
            double e = config.systematic_sd * rng.normal();
            std::fill(systematic.begin(), systematic.end(), e);
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double n = config.n0;
            for (std::size_t s = 0; s < steps; ++s) {
                double eps = std::clamp(baseline[r][s] + systematic[s], 0.0, 1.0);
                n *= (1.0 - eps);
                sums[r][s].add(n);
            }
        }
    }

    MCResult result;
    result.eps0 = config.eps0;
    result.ai_max = config.ai_max;
    result.mean_N.assign(rows, std::vector<double>(steps));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t s = 0; s < steps; ++s) {
            result.mean_N[r][s] = sums[r][s].value() / config.trajectories;
        }
    }
    return result;
}

std::string mc_to_csv(const MCResult& result) {
    std::ostringstream out;
    out << "eps0,assembly_index,mean_N\n";
    for (std::size_t r = 0; r < result.eps0.size(); ++r) {
        for (std::size_t s = 0; s < result.mean_N[r].size(); ++s) {
            out << format_double(result.eps0[r]) << ',' << (s + 1) << ','
                << format_double(result.mean_N[r][s]) << '\n';
        }
    }
    return out.str();
}

std::string mc_to_svg(const MCResult& result) {
    constexpr double width = 760, height = 480;
    constexpr double left = 70, right = 130, top = 20, bottom = 50;
    constexpr double plot_w = width - left - right, plot_h = height - top - bottom;
    constexpr int decade_floor = -10;  // counts below 1e-10 are pinned to the axis

    double max_val = 1.0;
    for (const auto& row : result.mean_N) {
        for (double v : row) max_val = std::max(max_val, v);
    }
    const int decade_top = static_cast<int>(std::ceil(std::log10(max_val)));
    auto y_of = [&](double v) {
        double lv = v > 0 ? std::log10(v) : decade_floor;
        lv = std::clamp(lv, static_cast<double>(decade_floor), static_cast<double>(decade_top));
        return top + plot_h * (decade_top - lv) / (decade_top - decade_floor);
    };
    auto x_of = [&](double a) {
        double span = std::max(1, result.ai_max - 1);
        return left + plot_w * (a - 1) / span;
    };
    auto num = [](double v) {
        std::ostringstream s;
        s.precision(2);
        s << std::fixed << v;
        return s.str();
    };

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int d = decade_floor; d <= decade_top; d += 2) {
        double y = y_of(std::pow(10.0, d));
        svg << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << num(y) << "\" y2=\""
            << num(y) << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << d
            << "</text>\n";
    }
    for (int a = 1; a <= result.ai_max; a += (result.ai_max >= 20 ? 20 : 1)) {
        double x = x_of(a);
        svg << "<text x=\"" << num(x) << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">" << a
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">assembly index a_i</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 16 " << top + plot_h / 2
        << ")\" text-anchor=\"middle\">mean flawless copies N</text>\n";
    for (std::size_t r = 0; r < result.mean_N.size(); ++r) {
        const char* colour = palette[r % 10];
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t s = 0; s < result.mean_N[r].size(); ++s) {
            if (s) svg << ' ';
            svg << num(x_of(static_cast<double>(s + 1))) << ',' << num(y_of(result.mean_N[r][s]));
        }
        svg << "\"/>\n";
        double ly = top + 14 + 16.0 * static_cast<double>(r);
        svg << "<line x1=\"" << left + plot_w + 12 << "\" x2=\"" << left + plot_w + 32 << "\" y1=\"" << ly
            << "\" y2=\"" << ly << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + plot_w + 36 << "\" y=\"" << ly + 4 << "\">eps0=" << format_double(result.eps0[r])
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace chemputer::assembly
