#include "bridgegan/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "bridgegan/errors.hpp"

namespace bridgegan {

namespace {

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = h.at(r, c);
    return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.at(r, c) = m(r, c);
    return h;
}

bool three_collinear(const std::vector<PointPair>& pairs, double tol = 1e-9) {
    const std::size_t n = pairs.size();
    for (std::size_t i = 0; i + 2 < n; ++i) {
        for (std::size_t j = i + 1; j + 1 < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
                const double ax = pairs[j].x1 - pairs[i].x1;
                const double ay = pairs[j].y1 - pairs[i].y1;
                const double bx = pairs[k].x1 - pairs[i].x1;
                const double by = pairs[k].y1 - pairs[i].y1;
                const double cross = ax * by - ay * bx;
                const double scale = std::max({std::hypot(ax, ay) * std::hypot(bx, by), 1.0});
                if (std::fabs(cross) < tol * scale) return true;
            }
        }
    }
    return false;
}

}  // namespace

Homography Homography::from_array(const std::array<double, 9>& a) {
    Homography h;
    h.m = a;
    return h.normalized();
}

Homography Homography::normalized() const {
    Homography out = *this;
    double fro = 0.0;
    for (double v : m) fro += v * v;
    fro = std::sqrt(fro);
    if (fro == 0.0) throw degeneracy_error("zero homography");
    if (std::fabs(m[8]) > 1e-8 * fro) {
        for (double& v : out.m) v /= m[8];
    } else {
        for (double& v : out.m) v /= fro;
    }
    return out;
}

Homography Homography::inverse() const {
    Eigen::Matrix3d e = to_eigen(*this);
    const double det = e.determinant();
    if (!std::isfinite(det) || std::fabs(det) < 1e-14) {
        throw degeneracy_error("homography is singular");
    }
    return from_eigen(e.inverse()).normalized();
}

Homography Homography::compose(const Homography& other) const {
    return from_eigen(to_eigen(*this) * to_eigen(other)).normalized();
}

Homography::Projected Homography::apply_homogeneous(double x, double y) const {
    return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5],
            m[6] * x + m[7] * y + m[8]};
}

std::pair<double, double> Homography::apply(double x, double y) const {
    const Projected p = apply_homogeneous(x, y);
    if (std::fabs(p.w) < 1e-14) {
        throw degeneracy_error("point maps to infinity under homography");
    }
    return {p.x / p.w, p.y / p.w};
}

Homography dlt(const std::vector<PointPair>& pairs) {
    if (pairs.size() < 4) {
        throw contract_error("dlt: at least 4 point pairs required");
    }
    if (pairs.size() <= 8 && three_collinear(pairs)) {
        throw degeneracy_error("dlt: three collinear source points");
    }

    // Hartley normalization on both sides.
    auto normalizer = [&](bool src) {
        double mx = 0, my = 0;
        for (const auto& p : pairs) {
            mx += src ? p.x1 : p.x2;
            my += src ? p.y1 : p.y2;
        }
        mx /= pairs.size();
        my /= pairs.size();
        double dist = 0;
        for (const auto& p : pairs) {
            dist += std::hypot((src ? p.x1 : p.x2) - mx, (src ? p.y1 : p.y2) - my);
        }
        dist /= pairs.size();
        const double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
        Eigen::Matrix3d t;
        t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
        return t;
    };
    const Eigen::Matrix3d t1 = normalizer(true);
    const Eigen::Matrix3d t2 = normalizer(false);

    Eigen::MatrixXd a(2 * pairs.size(), 9);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double x = t1(0, 0) * pairs[i].x1 + t1(0, 2);
        const double y = t1(1, 1) * pairs[i].y1 + t1(1, 2);
        const double u = t2(0, 0) * pairs[i].x2 + t2(0, 2);
        const double v = t2(1, 1) * pairs[i].y2 + t2(1, 2);
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Two (near-)zero singular values means the solution is not unique.
    if (sv.size() >= 2 && sv(sv.size() - 2) < 1e-9 * std::max(sv(0), 1e-300)) {
        throw degeneracy_error("dlt: degenerate correspondence configuration");
    }
    Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d result = t2.inverse() * hn * t1;
    if (std::fabs(result.determinant()) < 1e-14) {
        throw degeneracy_error("dlt: produced singular homography");
    }
    return from_eigen(result).normalized();
}

Homography dlt(const std::vector<Correspondence>& correspondences) {
    std::vector<PointPair> pairs;
    pairs.reserve(correspondences.size());
    for (const auto& c : correspondences) {
        pairs.push_back({c.src.x, c.src.y, c.dst.x, c.dst.y});
    }
    return dlt(pairs);
}

RansacResult ransac(const std::vector<Correspondence>& correspondences,
                    int iterations, double inlier_threshold_px, Rng& rng) {
    if (correspondences.size() < 4) {
        throw estimation_error("ransac: fewer than 4 correspondences");
    }
    if (inlier_threshold_px <= 0) {
        throw contract_error("ransac: threshold must be positive");
    }
    const int n = static_cast<int>(correspondences.size());

    auto reproj_error = [&](const Homography& h, const Correspondence& c) {
        const auto p = h.apply_homogeneous(c.src.x, c.src.y);
        if (std::fabs(p.w) < 1e-12) return std::numeric_limits<double>::infinity();
        return std::hypot(p.x / p.w - c.dst.x, p.y / p.w - c.dst.y);
    };

    int best_count = 0;
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<char> best_mask;

    std::vector<PointPair> sample(4);
    for (int it = 0; it < iterations; ++it) {
        int idx[4];
        idx[0] = rng.uniform_int(0, n - 1);
        for (int j = 1; j < 4; ++j) {
            bool fresh;
            do {
                idx[j] = rng.uniform_int(0, n - 1);
                fresh = true;
                for (int k = 0; k < j; ++k) fresh &= (idx[j] != idx[k]);
            } while (!fresh);
        }
        for (int j = 0; j < 4; ++j) {
            const auto& c = correspondences[idx[j]];
            sample[j] = {c.src.x, c.src.y, c.dst.x, c.dst.y};
        }
        Homography h;
        try {
            h = dlt(sample);
        } catch (const degeneracy_error&) {
            continue;
        }
        int count = 0;
        double err_sum = 0;
        std::vector<char> mask(n, 0);
        for (int i = 0; i < n; ++i) {
            const double e = reproj_error(h, correspondences[i]);
            if (e < inlier_threshold_px) {
                mask[i] = 1;
                ++count;
                err_sum += e;
            }
        }
        const double mean_err = count > 0 ? err_sum / count : 0.0;
        if (count > best_count || (count == best_count && mean_err < best_err)) {
            best_count = count;
            best_err = mean_err;
            best_mask = std::move(mask);
        }
    }

    if (best_count < 4) {
        throw estimation_error("ransac: no model with at least 4 inliers");
    }

    // Refit on the consensus set, then recompute the mask with the refit H.
    std::vector<Correspondence> inliers;
    for (int i = 0; i < n; ++i) {
        if (best_mask[i]) inliers.push_back(correspondences[i]);
    }
    RansacResult result;
    try {
        result.h = dlt(inliers);
    } catch (const degeneracy_error&) {
        throw estimation_error("ransac: consensus set is degenerate");
    }
    result.inlier_mask.assign(n, 0);
    double err_sum = 0;
    for (int i = 0; i < n; ++i) {
        const double e = reproj_error(result.h, correspondences[i]);
        if (e < inlier_threshold_px) {
            result.inlier_mask[i] = 1;
            ++result.inlier_count;
            err_sum += e;
        }
    }
    if (result.inlier_count < 4) {
        throw estimation_error("ransac: refit lost the consensus set");
    }
    result.mean_reproj_error = err_sum / result.inlier_count;
    return result;
}

Image warp(const Image& image, const Homography& h, int out_width,
           int out_height) {
    const Homography hinv = h.inverse();
    Image out(out_width, out_height, image.channels);
    // The homography's overall sign is arbitrary; fix the reference sign from
    // the output region so pixels past the plane at infinity can be culled.
    double ref_w = 0;
    for (double fy : {0.0, 0.5, 1.0}) {
        for (double fx : {0.0, 0.5, 1.0}) {
            const auto p = hinv.apply_homogeneous(fx * (out_width - 1),
                                                  fy * (out_height - 1));
            if (std::fabs(p.w) > std::fabs(ref_w)) ref_w = p.w;
        }
    }
    const double sign = ref_w < 0 ? -1.0 : 1.0;
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const auto p = hinv.apply_homogeneous(x, y);
            if (p.w <= 1e-12 && p.w >= -1e-12) continue;
            const double sx = p.x / p.w;
            const double sy = p.y / p.w;
            if (p.w * sign < 0) continue;  // past the plane at infinity
            if (sx < 0 || sy < 0 || sx > image.width - 1 || sy > image.height - 1) {
                continue;
            }
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const int y1 = std::min(y0 + 1, image.height - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(x0, y0, c) * (1 - fx) +
                                   image.at(x1, y0, c) * fx;
                const double bot = image.at(x0, y1, c) * (1 - fx) +
                                   image.at(x1, y1, c) * fx;
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    std::lround(std::clamp(top * (1 - fy) + bot * fy, 0.0, 255.0)));
            }
        }
    }
    return out;
}

EstimationResult estimate_homography(const Image& src, const Image& dst,
                                     Rng& rng, const OrbParams& params,
                                     int ransac_iterations,
                                     double inlier_threshold_px, int top_k) {
    const auto fa = detect_and_describe(to_gray(src), params.levels,
                                        params.max_keypoints,
                                        params.fast_threshold,
                                        params.scale_factor);
    const auto fb = detect_and_describe(to_gray(dst), params.levels,
                                        params.max_keypoints,
                                        params.fast_threshold,
                                        params.scale_factor);
    const auto matches = match(fa, fb, top_k);
    if (matches.size() < 4) {
        throw estimation_error("estimate_homography: not enough matches");
    }
    const auto r = ransac(matches, ransac_iterations, inlier_threshold_px, rng);
    EstimationResult result;
    result.h = r.h;
    result.matches = static_cast<int>(matches.size());
    result.inliers = r.inlier_count;
    result.mean_reproj_error = r.mean_reproj_error;
    return result;
}

}  // namespace bridgegan
