#include "vrpanel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <tuple>

#include "vrpanel/errors.hpp"

namespace vrpanel {

using nlohmann::json;

std::string to_string(CalibrationMode m) {
    return m == CalibrationMode::Linear32 ? "linear32" : "affine33";
}

CalibrationMode parse_calibration_mode(std::string_view text) {
    if (text == "linear32") return CalibrationMode::Linear32;
    if (text == "affine33") return CalibrationMode::Affine33;
    throw ParseError("unknown calibration mode '" + std::string(text) + "'");
}

CalibrationMatrix CalibrationMatrix::linear(const std::array<std::array<double, 2>, 3>& a) {
    CalibrationMatrix m;
    m.mode = CalibrationMode::Linear32;
    for (int r = 0; r < 3; ++r) m.rows[r] = {a[r][0], a[r][1], 0.0};
    return m;
}

CalibrationMatrix CalibrationMatrix::affine(const std::array<std::array<double, 3>, 3>& a) {
    CalibrationMatrix m;
    m.mode = CalibrationMode::Affine33;
    m.rows = a;
    return m;
}

double CalibrationMatrix::max_abs_difference(const CalibrationMatrix& other) const {
    double worst = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(rows[r][c] - other.rows[r][c]));
    return worst;
}

WorldPoint project_pixel(const CalibrationMatrix& a, const PixelCoord& p) {
    const double h = a.mode == CalibrationMode::Affine33 ? 1.0 : 0.0;
    const auto row = [&](int r) { return a.rows[r][0] * p.i + a.rows[r][1] * p.j + a.rows[r][2] * h; };
    return {row(0), row(1), row(2)};
}

namespace {

constexpr double kRankTolerance = 1e-10;

// Solves G x = b for a symmetric positive definite G of size n <= 3 via
// Cholesky. Returns false when a pivot collapses (rank deficiency).
bool cholesky_solve(std::array<std::array<double, 3>, 3> g, int n,
                    std::array<std::array<double, 3>, 3>& rhs_cols, int n_rhs) {
    std::array<std::array<double, 3>, 3> l{};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = g[i][j];
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            if (i == j) {
                // g is normalized to unit diagonal, so the pivot is relative.
                if (s <= kRankTolerance) return false;
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    for (int c = 0; c < n_rhs; ++c) {
        std::array<double, 3> y{};
        for (int i = 0; i < n; ++i) {
            double s = rhs_cols[c][i];
            for (int k = 0; k < i; ++k) s -= l[i][k] * y[k];
            y[i] = s / l[i][i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= l[k][i] * rhs_cols[c][k];
            rhs_cols[c][i] = s / l[i][i];
        }
    }
    return true;
}

}  // namespace

CalibrationMatrix calibrate_camera(std::span<const Correspondence> pairs, CalibrationMode mode) {
    const int n = mode == CalibrationMode::Linear32 ? 2 : 3;
    if (static_cast<int>(pairs.size()) < n)
        throw InsufficientData(to_string(mode) + " calibration needs at least " + std::to_string(n) +
                               " correspondences, got " + std::to_string(pairs.size()));

    const auto design = [&](const Correspondence& c, int col) {
        return col == 0 ? c.pixel.i : col == 1 ? c.pixel.j : 1.0;
    };

    // Column equilibration: scale each design column to unit RMS so the
    // normal matrix has unit diagonal and the rank test is scale free.
    std::array<double, 3> scale{1.0, 1.0, 1.0};
    for (int col = 0; col < n; ++col) {
        double ss = 0.0;
        for (const auto& c : pairs) ss += design(c, col) * design(c, col);
        const double rms = std::sqrt(ss / static_cast<double>(pairs.size()));
        if (!(rms > 0.0) || !std::isfinite(rms))
            throw DegenerateConfiguration("pixel column " + std::to_string(col) +
                                          " is identically zero; the design matrix is rank deficient");
        scale[col] = 1.0 / rms;
    }

    std::array<std::array<double, 3>, 3> gram{};
    std::array<std::array<double, 3>, 3> rhs{};  // rhs[world row][design col]
    for (const auto& c : pairs) {
        const std::array<double, 3> w{c.world.x, c.world.y, c.world.z};
        for (int a = 0; a < n; ++a) {
            const double da = design(c, a) * scale[a];
            for (int b = 0; b < n; ++b) gram[a][b] += da * design(c, b) * scale[b];
            for (int r = 0; r < 3; ++r) rhs[r][a] += da * w[r];
        }
    }
    const double inv_count = 1.0 / static_cast<double>(pairs.size());
    for (auto& row : gram)
        for (auto& v : row) v *= inv_count;
    for (auto& row : rhs)
        for (auto& v : row) v *= inv_count;

    if (!cholesky_solve(gram, n, rhs, 3)) {
        throw DegenerateConfiguration(
            mode == CalibrationMode::Linear32
                ? "pixel vectors are linearly dependent; Linear32 needs two independent pixel directions"
                : "pixel coordinates are collinear; Affine33 needs three non-collinear points");
    }

    CalibrationMatrix out;
    out.mode = mode;
    for (int r = 0; r < 3; ++r)
        for (int col = 0; col < n; ++col) out.rows[r][col] = rhs[r][col] * scale[col];
    return out;
}

double residual(const CalibrationMatrix& a, std::span<const Correspondence> pairs) {
    if (pairs.empty()) throw InsufficientData("residual of an empty correspondence set");
    double ss = 0.0;
    for (const auto& c : pairs) {
        const WorldPoint d = project_pixel(a, c.pixel) - c.world;
        ss += d.x * d.x + d.y * d.y + d.z * d.z;
    }
    return std::sqrt(ss / static_cast<double>(pairs.size()));
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

WorldPoint mean_of_sorted(std::vector<WorldPoint> pts) {
    // Fixed summation order keeps the result independent of input order.
    std::sort(pts.begin(), pts.end(), [](const WorldPoint& a, const WorldPoint& b) {
        return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
    });
    WorldPoint sum;
    for (const auto& p : pts) sum = sum + p;
    return sum * (1.0 / static_cast<double>(pts.size()));
}

}  // namespace

FusedPosition fuse(std::span<const MarkerObservation> obs, const CalibrationSet& cals,
                   const FusionConfig& cfg) {
    std::vector<WorldPoint> estimates;
    std::optional<double> time;
    for (const auto& o : obs) {
        if (time && o.time != *time)
            throw OrderingError("fuse expects observations from a single instant");
        time = o.time;
        if (!o.visible) continue;
        auto it = cals.find(o.camera);
        if (it == cals.end()) throw ValidationError("no calibration for camera '" + o.camera + "'");
        estimates.push_back(project_pixel(it->second, o.pixel));
    }
    if (estimates.empty())
        throw NoVisibleMarker("marker not visible in any camera at t=" +
                              std::to_string(time.value_or(0.0)));

    std::vector<double> xs, ys, zs;
    for (const auto& e : estimates) {
        xs.push_back(e.x);
        ys.push_back(e.y);
        zs.push_back(e.z);
    }
    const WorldPoint med{median(xs), median(ys), median(zs)};

    std::vector<WorldPoint> kept;
    for (const auto& e : estimates)
        if (distance(e, med) <= cfg.reject_threshold_m) kept.push_back(e);
    // No consensus at all (e.g. two cameras far apart): fall back to every estimate.
    if (kept.empty()) kept = estimates;

    return {*time, mean_of_sorted(kept), static_cast<int>(kept.size())};
}

json calibration_to_json(const CalibrationSet& cals) {
    json out = json::object();
    for (const auto& [id, m] : cals) {
        json rows = json::array();
        for (const auto& r : m.rows) {
            if (m.mode == CalibrationMode::Linear32)
                rows.push_back({r[0], r[1]});
            else
                rows.push_back({r[0], r[1], r[2]});
        }
        out[id] = {{"mode", to_string(m.mode)}, {"rows", std::move(rows)}};
    }
    return out;
}

CalibrationSet calibration_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("calibration file must map camera ids to matrices");
    CalibrationSet out;
    for (const auto& [id, entry] : j.items()) {
        try {
            CalibrationMatrix m;
            m.mode = parse_calibration_mode(entry.at("mode").get<std::string>());
            const auto& rows = entry.at("rows");
            if (rows.size() != 3) throw ParseError("camera '" + id + "': expected 3 rows");
            for (int r = 0; r < 3; ++r) {
                const auto& row = rows.at(r);
                if (static_cast<int>(row.size()) != m.columns())
                    throw ParseError("camera '" + id + "': row " + std::to_string(r) + " has " +
                                     std::to_string(row.size()) + " entries");
                for (int c = 0; c < m.columns(); ++c) {
                    m.rows[r][c] = row.at(c).get<double>();
                    if (!std::isfinite(m.rows[r][c]))
                        throw ParseError("camera '" + id + "': non-finite entry");
                }
            }
            out[id] = m;
        } catch (const json::exception& e) {
            throw ParseError("camera '" + id + "': " + e.what());
        }
    }
    return out;
}

CalibrationSet load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open calibration file " + path.string());
    try {
        return calibration_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_calibration(const CalibrationSet& cals, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Runtime, "cannot write calibration file " + path.string());
    out << calibration_to_json(cals).dump(2) << '\n';
}

}  // namespace vrpanel
