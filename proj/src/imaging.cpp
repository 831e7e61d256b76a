#include "gtrm/imaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <unordered_map>

#include "gtrm/errors.hpp"

namespace gtrm::imaging {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

uint64_t fnv1a64(const uint8_t* data, std::size_t n) {
    uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

// --- summed-area tables -----------------------------------------------------

struct Integrals {
    uint32_t w = 0, h = 0;
    std::vector<uint64_t> s1, s2;  // (w+1) x (h+1), row-major

    void build(const GrayImage& img) {
        w = img.width;
        h = img.height;
        const std::size_t stride = w + 1;
        s1.assign(stride * (h + 1), 0);
        s2.assign(stride * (h + 1), 0);
        for (uint32_t y = 0; y < h; ++y) {
            uint64_t row1 = 0, row2 = 0;
            const uint8_t* src = img.data.data() + std::size_t(y) * w;
            uint64_t* d1 = s1.data() + (std::size_t(y) + 1) * stride;
            uint64_t* d2 = s2.data() + (std::size_t(y) + 1) * stride;
            const uint64_t* p1 = d1 - stride;
            const uint64_t* p2 = d2 - stride;
            for (uint32_t x = 0; x < w; ++x) {
                const uint64_t v = src[x];
                row1 += v;
                row2 += v * v;
                d1[x + 1] = p1[x + 1] + row1;
                d2[x + 1] = p2[x + 1] + row2;
            }
        }
    }

    void window(uint32_t x, uint32_t y, uint32_t tw, uint32_t th,
                uint64_t& sum, uint64_t& sum2) const {
        const std::size_t stride = w + 1;
        const std::size_t a = std::size_t(y) * stride + x;
        const std::size_t b = (std::size_t(y) + th) * stride + x;
        sum = s1[b + tw] + s1[a] - s1[a + tw] - s1[b];
        sum2 = s2[b + tw] + s2[a] - s2[a + tw] - s2[b];
    }
};

// --- FFT cross-correlation ---------------------------------------------------
//
// The ZNCC cross term sum(I*T) is computed either directly or via one padded
// FFT correlation per template. Both paths yield the same exact integers: the
// FFT result is rounded back, and a precision guard keeps the FFT path away
// from sizes where rounding could no longer be trusted.

struct FftPlans {
    fftw_plan fwd = nullptr;  // r2c, h x w
    fftw_plan inv = nullptr;  // c2r
};

std::mutex g_fft_mu;

FftPlans& plans_for(uint32_t w, uint32_t h) {
    static std::map<std::pair<uint32_t, uint32_t>, FftPlans> cache;
    auto [it, fresh] = cache.try_emplace({w, h});
    if (fresh) {
        const std::size_t rn = std::size_t(w) * h;
        const std::size_t cn = std::size_t(h) * (w / 2 + 1);
        double* real = fftw_alloc_real(rn);
        fftw_complex* cplx = fftw_alloc_complex(cn);
        it->second.fwd = fftw_plan_dft_r2c_2d(int(h), int(w), real, cplx, FFTW_ESTIMATE);
        it->second.inv = fftw_plan_dft_c2r_2d(int(h), int(w), cplx, real, FFTW_ESTIMATE);
        fftw_free(real);
        fftw_free(cplx);
        if (!it->second.fwd || !it->second.inv) throw Error("fft planning failed");
    }
    return it->second;
}

struct FftBuf {
    double* real = nullptr;
    fftw_complex* cplx = nullptr;
    FftBuf(std::size_t rn, std::size_t cn) {
        real = fftw_alloc_real(rn);
        cplx = fftw_alloc_complex(cn);
    }
    ~FftBuf() {
        fftw_free(real);
        fftw_free(cplx);
    }
    FftBuf(const FftBuf&) = delete;
    FftBuf& operator=(const FftBuf&) = delete;
};

struct SpectrumKey {
    uint32_t pw = 0, ph = 0, tw = 0, th = 0;
    uint64_t hash = 0;
    auto operator<=>(const SpectrumKey&) const = default;
};

// FIFO-capped cache of template spectra (templates repeat across frames;
// images don't, so they are never cached).
std::shared_ptr<std::vector<double>>& cached_template_spectrum(const SpectrumKey& key) {
    static std::map<SpectrumKey, std::shared_ptr<std::vector<double>>> cache;
    static std::deque<SpectrumKey> order;
    constexpr std::size_t kCap = 128;
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    while (cache.size() >= kCap) {
        cache.erase(order.front());
        order.pop_front();
    }
    auto [it, _] = cache.emplace(key, nullptr);
    order.push_back(key);
    return it->second;
}

// sum(I*T) for every placement, exact integers, via padded FFT correlation.
std::vector<int64_t> cross_fft(const GrayImage& image, const GrayImage& tmpl) {
    const uint32_t w = image.width, h = image.height;
    const std::size_t rn = std::size_t(w) * h;
    const std::size_t cn = std::size_t(h) * (w / 2 + 1);

    std::shared_ptr<std::vector<double>> tspec;
    FftPlans* plans = nullptr;
    {
        std::scoped_lock lk(g_fft_mu);
        plans = &plans_for(w, h);
        SpectrumKey key{w, h, tmpl.width, tmpl.height,
                        fnv1a64(tmpl.data.data(), tmpl.data.size())};
        auto& slot = cached_template_spectrum(key);
        if (!slot) {
            FftBuf buf(rn, cn);
            std::fill(buf.real, buf.real + rn, 0.0);
            for (uint32_t y = 0; y < tmpl.height; ++y)
                for (uint32_t x = 0; x < tmpl.width; ++x)
                    buf.real[std::size_t(y) * w + x] = tmpl.at(x, y);
            fftw_execute_dft_r2c(plans->fwd, buf.real, buf.cplx);
            slot = std::make_shared<std::vector<double>>(
                reinterpret_cast<double*>(buf.cplx),
                reinterpret_cast<double*>(buf.cplx) + 2 * cn);
        }
        tspec = slot;  // shared ownership; FIFO eviction can't pull it away
    }
    const double* tsp = tspec->data();

    FftBuf img(rn, cn), work(rn, cn);
    for (std::size_t i = 0; i < rn; ++i) img.real[i] = image.data[i];
    fftw_execute_dft_r2c(plans->fwd, img.real, img.cplx);

    const double norm = 1.0 / double(rn);
    for (std::size_t i = 0; i < cn; ++i) {
        const double ar = img.cplx[i][0], ai = img.cplx[i][1];
        const double br = tsp[2 * i], bi = tsp[2 * i + 1];
        // a * conj(b): correlation rather than convolution
        work.cplx[i][0] = (ar * br + ai * bi) * norm;
        work.cplx[i][1] = (ai * br - ar * bi) * norm;
    }
    fftw_execute_dft_c2r(plans->inv, work.cplx, work.real);

    const uint32_t pw = w - tmpl.width + 1, ph = h - tmpl.height + 1;
    std::vector<int64_t> out(std::size_t(pw) * ph);
    for (uint32_t y = 0; y < ph; ++y)
        for (uint32_t x = 0; x < pw; ++x)
            out[std::size_t(y) * pw + x] = llround(work.real[std::size_t(y) * w + x]);
    return out;
}

std::vector<int64_t> cross_direct(const GrayImage& image, const GrayImage& tmpl) {
    const uint32_t pw = image.width - tmpl.width + 1;
    const uint32_t ph = image.height - tmpl.height + 1;
    std::vector<int64_t> out(std::size_t(pw) * ph);

    struct Tap {
        uint32_t dx, dy;
        uint32_t val;
    };
    std::vector<Tap> taps;
    taps.reserve(tmpl.size());
    for (uint32_t ty = 0; ty < tmpl.height; ++ty)
        for (uint32_t tx = 0; tx < tmpl.width; ++tx)
            if (uint8_t v = tmpl.at(tx, ty)) taps.push_back({tx, ty, v});

    const bool sparse = taps.size() * 3 <= tmpl.size();
    for (uint32_t y = 0; y < ph; ++y) {
        for (uint32_t x = 0; x < pw; ++x) {
            uint64_t acc = 0;
            if (sparse) {
                for (const Tap& t : taps)
                    acc += uint64_t(image.at(x + t.dx, y + t.dy)) * t.val;
            } else {
                for (uint32_t ty = 0; ty < tmpl.height; ++ty) {
                    const uint8_t* ip = image.data.data() +
                                        std::size_t(y + ty) * image.width + x;
                    const uint8_t* tp = tmpl.data.data() + std::size_t(ty) * tmpl.width;
                    uint32_t row = 0;
                    for (uint32_t tx = 0; tx < tmpl.width; ++tx)
                        row += uint32_t(ip[tx]) * tp[tx];
                    acc += row;
                }
            }
            out[std::size_t(y) * pw + x] = int64_t(acc);
        }
    }
    return out;
}

// True when double-precision FFT round-off stays safely below the 0.5 needed
// to round the cross term back to the exact integer.
bool fft_exact_enough(std::size_t tmpl_area, std::size_t image_area) {
    return double(tmpl_area) * 65025.0 * std::sqrt(double(image_area)) * 4.5e-15 < 0.25;
}

struct TemplateStats {
    uint64_t n = 0, sum = 0, sum2 = 0;
    uint64_t var = 0;  // n*sum2 - sum^2
};

TemplateStats stats_of(const GrayImage& tmpl) {
    TemplateStats st;
    st.n = tmpl.size();
    for (uint8_t v : tmpl.data) {
        st.sum += v;
        st.sum2 += uint64_t(v) * v;
    }
    st.var = st.n * st.sum2 - st.sum * st.sum;
    return st;
}

double zncc_score(int64_t num, uint64_t var_i, uint64_t var_t) {
    const double denom = std::sqrt(double(var_i) * double(var_t));
    const double zncc = double(num) / denom;
    return std::clamp(0.5 * (zncc + 1.0), 0.0, 1.0);
}

std::vector<int64_t> cross_terms(const GrayImage& image, const GrayImage& tmpl,
                                 detail::NccPath path) {
    if (path == detail::NccPath::Auto) {
        std::size_t nnz = 0;
        for (uint8_t v : tmpl.data)
            if (v) ++nnz;
        const uint64_t pw = image.width - tmpl.width + 1;
        const uint64_t ph = image.height - tmpl.height + 1;
        const uint64_t direct_cost = pw * ph * std::min<uint64_t>(nnz * 3, tmpl.size());
        path = (direct_cost > 3'000'000 && fft_exact_enough(tmpl.size(), image.size()))
                   ? detail::NccPath::Fft
                   : detail::NccPath::Direct;
    }
    return path == detail::NccPath::Fft ? cross_fft(image, tmpl) : cross_direct(image, tmpl);
}

// --- match candidates (shared by ncc_match / match_multiscale) ---------------

struct Candidate {
    Region region;
    double score;
    double scale;
    uint32_t tmpl_index;
    uint32_t scale_index;
};

void collect_candidates(const Integrals& ii, const GrayImage& image, const GrayImage& tmpl,
                        double threshold, double scale, uint32_t ti, uint32_t si,
                        std::vector<Candidate>& out) {
    const TemplateStats st = stats_of(tmpl);
    const uint32_t pw = image.width - tmpl.width + 1;
    const uint32_t ph = image.height - tmpl.height + 1;
    const uint64_t n = st.n;

    std::vector<int64_t> cross;
    if (st.var != 0) cross = cross_terms(image, tmpl, detail::NccPath::Auto);

    // reject quickly in integer/long-double space; survivors get the exact
    // double score so borderline results agree with ncc_match to the bit
    const double t = 2.0 * threshold - 1.0;
    const long double t2 = std::max(0.0, t * t - 1e-9);

    for (uint32_t y = 0; y < ph; ++y) {
        for (uint32_t x = 0; x < pw; ++x) {
            uint64_t si1, si2;
            ii.window(x, y, tmpl.width, tmpl.height, si1, si2);
            const uint64_t var_i = n * si2 - si1 * si1;
            double score;
            if (st.var == 0 || var_i == 0) {
                const uint64_t diff = si1 > st.sum ? si1 - st.sum : st.sum - si1;
                score = diff <= n ? 0.5 : 0.0;
                if (score < threshold) continue;
            } else {
                const int64_t num =
                    int64_t(n) * cross[std::size_t(y) * pw + x] - int64_t(si1 * st.sum);
                if (t > 0) {
                    if (num <= 0) continue;
                    const long double lhs = (long double)(num) * num;
                    const long double rhs = t2 * (long double)(var_i) * (long double)(st.var);
                    if (lhs < rhs) continue;
                }
                score = zncc_score(num, var_i, st.var);
                if (score < threshold) continue;
            }
            out.push_back({Region{x, y, tmpl.width, tmpl.height}, score, scale, ti, si});
        }
    }
}

}  // namespace

// --- basics -------------------------------------------------------------------

GrayImage make_gray(uint32_t width, uint32_t height, uint8_t fill) {
    if (width == 0 || height == 0) throw DimensionError("gray image dims must be positive");
    return GrayImage{width, height,
                     std::vector<uint8_t>(std::size_t(width) * height, fill)};
}

GrayImage make_gray(uint32_t width, uint32_t height, std::vector<uint8_t> data) {
    if (width == 0 || height == 0) throw DimensionError("gray image dims must be positive");
    if (data.size() != std::size_t(width) * height)
        throw DimensionError("gray image data size mismatch");
    return GrayImage{width, height, std::move(data)};
}

GrayImage crop(const GrayImage& img, const Region& r) {
    if (r.w == 0 || r.h == 0) throw DegenerateInputError("empty crop region");
    if (r.right() > img.width || r.bottom() > img.height)
        throw BoundsError("crop region out of bounds");
    GrayImage out = make_gray(r.w, r.h);
    for (uint32_t y = 0; y < r.h; ++y)
        std::memcpy(out.data.data() + std::size_t(y) * r.w,
                    img.data.data() + std::size_t(r.y + y) * img.width + r.x, r.w);
    return out;
}

std::size_t ContourSet::outer_count() const {
    std::size_t n = 0;
    for (const Contour& c : contours)
        if (!c.hole) ++n;
    return n;
}

std::size_t ContourSet::hole_count() const { return contours.size() - outer_count(); }

double ladder_scale(int rung) {
    if (rung < 0) throw ConfigError("ladder rung must be non-negative");
    double s = 0.5;
    for (int k = 0; k < rung; ++k) s *= 1.1;
    return s;
}

MatchConfig default_match_config(MatchMode mode) {
    MatchConfig cfg;
    cfg.mode = mode;
    for (int k = 0; k < kLadderRungs; ++k) cfg.scales.push_back(ladder_scale(k));
    return cfg;
}

void validate(const MatchConfig& cfg) {
    if (cfg.scales.empty()) throw ConfigError("match config needs at least one scale");
    double prev = 0.0;
    for (double s : cfg.scales) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("scales must be positive");
        if (s <= prev) throw ConfigError("scales must be strictly increasing");
        prev = s;
    }
    if (!(cfg.score_threshold >= 0.0 && cfg.score_threshold <= 1.0))
        throw ConfigError("score threshold must be in [0,1]");
    if (!(cfg.nms_iou >= 0.0 && cfg.nms_iou <= 1.0))
        throw ConfigError("nms iou must be in [0,1]");
}

std::pair<uint32_t, uint32_t> ScoreMap::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return {uint32_t(best % width), uint32_t(best / width)};
}

GrayImage to_gray(const Frame& frame) {
    GrayImage out = make_gray(frame.width, frame.height);
    if (frame.format == PixelFormat::GRAY8) {
        out.data = frame.data;
        return out;
    }
    const std::size_t n = std::size_t(frame.width) * frame.height;
    for (std::size_t i = 0; i < n; ++i) {
        const uint8_t* px = frame.data.data() + i * 4;
        out.data[i] = luma601(px[0], px[1], px[2]);
    }
    return out;
}

GrayImage resize_nearest(const GrayImage& img, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be positive");
    const uint32_t ow = std::max<uint32_t>(1, uint32_t(img.width * scale));
    const uint32_t oh = std::max<uint32_t>(1, uint32_t(img.height * scale));
    GrayImage out = make_gray(ow, oh);
    for (uint32_t y = 0; y < oh; ++y) {
        const uint32_t sy = std::min<uint32_t>(uint32_t(y / scale), img.height - 1);
        for (uint32_t x = 0; x < ow; ++x) {
            const uint32_t sx = std::min<uint32_t>(uint32_t(x / scale), img.width - 1);
            out.at(x, y) = img.at(sx, sy);
        }
    }
    return out;
}

GrayImage resize_to(const GrayImage& img, uint32_t w, uint32_t h) {
    if (w == 0 || h == 0) throw DimensionError("resize target dims must be positive");
    GrayImage out = make_gray(w, h);
    for (uint32_t y = 0; y < h; ++y) {
        const uint32_t sy = std::min<uint32_t>(uint32_t(uint64_t(y) * img.height / h),
                                               img.height - 1);
        for (uint32_t x = 0; x < w; ++x) {
            const uint32_t sx = std::min<uint32_t>(uint32_t(uint64_t(x) * img.width / w),
                                                   img.width - 1);
            out.at(x, y) = img.at(sx, sy);
        }
    }
    return out;
}

// --- template matching ---------------------------------------------------------

namespace detail {

ScoreMap ncc_match_path(const GrayImage& image, const GrayImage& tmpl, NccPath path) {
    if (tmpl.width > image.width || tmpl.height > image.height)
        throw DimensionError("template larger than image");
    // the exact 64-bit arithmetic (n^2 * 255^2 terms) holds up to this size
    if (tmpl.size() > 16'000'000)
        throw DimensionError("template too large for exact matching");

    const TemplateStats st = stats_of(tmpl);
    Integrals ii;
    ii.build(image);

    ScoreMap map;
    map.width = image.width - tmpl.width + 1;
    map.height = image.height - tmpl.height + 1;
    map.scores.resize(std::size_t(map.width) * map.height);

    std::vector<int64_t> cross;
    if (st.var != 0) cross = cross_terms(image, tmpl, path);

    const uint64_t n = st.n;
    for (uint32_t y = 0; y < map.height; ++y) {
        for (uint32_t x = 0; x < map.width; ++x) {
            uint64_t si1, si2;
            ii.window(x, y, tmpl.width, tmpl.height, si1, si2);
            const uint64_t var_i = n * si2 - si1 * si1;
            double score;
            if (st.var == 0 || var_i == 0) {
                const uint64_t diff = si1 > st.sum ? si1 - st.sum : st.sum - si1;
                score = diff <= n ? 0.5 : 0.0;
            } else {
                const int64_t num =
                    int64_t(n) * cross[std::size_t(y) * map.width + x] -
                    int64_t(si1 * st.sum);
                score = zncc_score(num, var_i, st.var);
            }
            map.scores[std::size_t(y) * map.width + x] = score;
        }
    }
    return map;
}

}  // namespace detail

ScoreMap ncc_match(const GrayImage& image, const GrayImage& tmpl) {
    return detail::ncc_match_path(image, tmpl, detail::NccPath::Auto);
}

std::vector<Detection> match_multiscale(const GrayImage& image,
                                        std::span<const GrayImage> templates,
                                        const MatchConfig& cfg,
                                        std::span<const std::string> labels) {
    validate(cfg);

    const GrayImage* target = &image;
    GrayImage edges;
    if (cfg.mode == MatchMode::Contour) {
        edges = contourize(image, 128);
        target = &edges;
    }
    Integrals ii;
    ii.build(*target);

    std::vector<Candidate> cands;
    for (uint32_t ti = 0; ti < templates.size(); ++ti) {
        for (uint32_t si = 0; si < cfg.scales.size(); ++si) {
            GrayImage t = resize_nearest(templates[ti], cfg.scales[si]);
            if (cfg.mode == MatchMode::Contour) t = contourize(t, 128);
            if (t.width > target->width || t.height > target->height) continue;
            if (t.size() > 16'000'000)
                throw DimensionError("template too large for exact matching");
            collect_candidates(ii, *target, t, cfg.score_threshold, cfg.scales[si],
                               ti, si, cands);
        }
    }

    // greedy NMS, best score first; ties resolved by registration order then
    // raster position so results are reproducible
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.tmpl_index != b.tmpl_index) return a.tmpl_index < b.tmpl_index;
        if (a.scale_index != b.scale_index) return a.scale_index < b.scale_index;
        if (a.region.y != b.region.y) return a.region.y < b.region.y;
        return a.region.x < b.region.x;
    });

    std::vector<Detection> kept;
    for (const Candidate& c : cands) {
        bool overlaps = false;
        for (const Detection& k : kept) {
            if (region_iou(c.region, k.region) > cfg.nms_iou) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;
        std::string label = c.tmpl_index < labels.size() ? labels[c.tmpl_index]
                                                         : std::to_string(c.tmpl_index);
        kept.push_back(Detection{c.region, c.score, c.scale, std::move(label)});
    }
    return kept;
}

// --- contours -------------------------------------------------------------------

GrayImage contourize(const GrayImage& img, uint8_t threshold) {
    GrayImage out = make_gray(img.width, img.height);
    const uint32_t w = img.width, h = img.height;
    for (uint32_t y = 0; y < h; ++y) {
        for (uint32_t x = 0; x < w; ++x) {
            if (img.at(x, y) <= threshold) continue;
            const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
                              img.at(x - 1, y) <= threshold ||
                              img.at(x + 1, y) <= threshold ||
                              img.at(x, y - 1) <= threshold ||
                              img.at(x, y + 1) <= threshold;
            if (edge) out.at(x, y) = 255;
        }
    }
    return out;
}

namespace {

// twice the signed area of the walk; positive = clockwise with y pointing down
int64_t shoelace2(const std::vector<Point>& pts) {
    int64_t acc = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& a = pts[i];
        const Point& b = pts[(i + 1) % pts.size()];
        acc += int64_t(a.x) * b.y - int64_t(b.x) * a.y;
    }
    return acc;
}

}  // namespace

ContourSet trace_contours(const GrayImage& binary) {
    const int w = int(binary.width), h = int(binary.height);
    std::vector<int32_t> f(std::size_t(w) * h, 0);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = binary.data[i] ? 1 : 0;

    auto fat = [&](int x, int y) -> int32_t& { return f[std::size_t(y) * w + x]; };
    auto nonzero = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && fat(x, y) != 0;
    };

    // neighborhood, counter-clockwise on screen (east, NE, north, ...)
    static constexpr int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    static constexpr int dy8[8] = {0, -1, -1, -1, 0, 1, 1, 1};

    ContourSet set;
    int32_t nbd = 1;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int32_t fv = fat(x, y);
            if (fv == 0) continue;

            bool hole;
            int from_dir;
            if (fv == 1 && (x == 0 || fat(x - 1, y) == 0)) {
                hole = false;
                from_dir = 4;  // west
            } else if (fv >= 1 && (x == w - 1 || fat(x + 1, y) == 0)) {
                hole = true;
                from_dir = 0;  // east
            } else {
                continue;
            }

            ++nbd;
            Contour contour;
            contour.hole = hole;

            // clockwise sweep from the start direction for the first neighbor
            int dir = -1;
            for (int k = 0; k < 8; ++k) {
                const int d = (from_dir - k + 8) & 7;
                if (nonzero(x + dx8[d], y + dy8[d])) {
                    dir = d;
                    break;
                }
            }
            if (dir < 0) {  // isolated pixel
                fat(x, y) = -nbd;
                contour.points.push_back({x, y});
                set.contours.push_back(std::move(contour));
                continue;
            }

            const int sx = x, sy = y;                          // p0
            const int fx = x + dx8[dir], fy = y + dy8[dir];    // p1
            int p2x = fx, p2y = fy;
            int p3x = sx, p3y = sy;

            while (true) {
                // counter-clockwise sweep around p3, starting after p2
                int back = 0;
                for (int k = 0; k < 8; ++k)
                    if (p3x + dx8[k] == p2x && p3y + dy8[k] == p2y) back = k;
                bool saw_east_zero = false;
                int next = -1;
                for (int k = 1; k <= 8; ++k) {
                    const int d = (back + k) & 7;
                    const int qx = p3x + dx8[d], qy = p3y + dy8[d];
                    if (nonzero(qx, qy)) {
                        next = d;
                        break;
                    }
                    if (d == 0) saw_east_zero = true;
                }
                const int p4x = p3x + dx8[next], p4y = p3y + dy8[next];

                if (saw_east_zero)
                    fat(p3x, p3y) = -nbd;
                else if (fat(p3x, p3y) == 1)
                    fat(p3x, p3y) = nbd;
                contour.points.push_back({p3x, p3y});

                if (p4x == sx && p4y == sy && p3x == fx && p3y == fy) break;
                p2x = p3x;
                p2y = p3y;
                p3x = p4x;
                p3y = p4y;
            }

            // normalize walk orientation: outer borders clockwise (positive
            // area, y down), holes counter-clockwise
            const int64_t a2 = shoelace2(contour.points);
            if ((hole && a2 > 0) || (!hole && a2 < 0))
                std::reverse(contour.points.begin(), contour.points.end());
            set.contours.push_back(std::move(contour));
        }
    }
    return set;
}

// --- hashing --------------------------------------------------------------------

uint64_t average_hash(const GrayImage& img) {
    const GrayImage r = resize_to(img, 8, 8);
    uint32_t sum = 0;
    for (uint8_t v : r.data) sum += v;
    uint64_t bits = 0;
    for (int i = 0; i < 64; ++i)
        if (uint32_t(r.data[i]) * 64 > sum) bits |= uint64_t(1) << i;
    return bits;
}

int hamming_distance(uint64_t a, uint64_t b) { return std::popcount(a ^ b); }

// --- inpainting -----------------------------------------------------------------

namespace {

void check_inpaint_region(const Frame& frame, const Region& region) {
    if (region.w == 0 || region.h == 0) throw DegenerateInputError("empty inpaint region");
    if (!frame.contains(region)) throw BoundsError("inpaint region out of bounds");
    if (region.x == 0 && region.y == 0 && region.w == frame.width &&
        region.h == frame.height)
        throw DegenerateInputError("inpaint region covers the entire frame");
}

std::vector<uint8_t> solid_patch(const Region& region, Rgba color) {
    std::vector<uint8_t> bytes(std::size_t(region.area()) * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
        bytes[i] = color.r;
        bytes[i + 1] = color.g;
        bytes[i + 2] = color.b;
        bytes[i + 3] = color.a;
    }
    return bytes;
}

}  // namespace

OverlayOp inpaint_majority(const Frame& frame, const Region& region) {
    check_inpaint_region(frame, region);

    Rgba mode_color;
    if (frame.format == PixelFormat::GRAY8) {
        std::array<uint64_t, 256> hist{};
        for (uint32_t y = 0; y < frame.height; ++y)
            for (uint32_t x = 0; x < frame.width; ++x) {
                if (x >= region.x && x < region.right() && y >= region.y &&
                    y < region.bottom())
                    continue;
                ++hist[frame.data[std::size_t(y) * frame.width + x]];
            }
        std::size_t best = 0;
        for (std::size_t v = 1; v < hist.size(); ++v)
            if (hist[v] > hist[best]) best = v;
        const uint8_t g = uint8_t(best);
        mode_color = Rgba{g, g, g, 255};
    } else {
        std::unordered_map<uint32_t, uint64_t> hist;
        for (uint32_t y = 0; y < frame.height; ++y)
            for (uint32_t x = 0; x < frame.width; ++x) {
                if (x >= region.x && x < region.right() && y >= region.y &&
                    y < region.bottom())
                    continue;
                hist[frame.rgba_at(x, y).packed()]++;
            }
        uint64_t best_count = 0;
        uint32_t best_packed = 0;
        bool first = true;
        for (const auto& [packed, count] : hist) {
            if (first || count > best_count ||
                (count == best_count && packed < best_packed)) {
                best_count = count;
                best_packed = packed;
                first = false;
            }
        }
        mode_color = Rgba{uint8_t(best_packed >> 24), uint8_t(best_packed >> 16),
                          uint8_t(best_packed >> 8), uint8_t(best_packed)};
    }
    return make_patch(region, solid_patch(region, mode_color));
}

OverlayOp inpaint_fmm(const Frame& frame, const Region& region, uint32_t radius) {
    check_inpaint_region(frame, region);
    if (radius == 0) throw ConfigError("inpaint radius must be at least 1");

    const uint32_t w = frame.width, h = frame.height;
    enum : uint8_t { KNOWN = 0, BAND = 1, INSIDE = 2 };
    std::vector<uint8_t> flag(std::size_t(w) * h, KNOWN);
    std::vector<double> tdist(std::size_t(w) * h, 0.0);
    // working copy of pixel values; filled values land here as we march
    std::vector<std::array<double, 4>> value(std::size_t(w) * h);

    for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < w; ++x) {
            const Rgba px = frame.rgba_at(x, y);
            value[std::size_t(y) * w + x] = {double(px.r), double(px.g), double(px.b),
                                             double(px.a)};
        }
    for (uint32_t y = region.y; y < region.bottom(); ++y)
        for (uint32_t x = region.x; x < region.right(); ++x) {
            flag[std::size_t(y) * w + x] = INSIDE;
            tdist[std::size_t(y) * w + x] = 1e9;
        }

    auto idx = [&](uint32_t x, uint32_t y) { return std::size_t(y) * w + x; };

    auto eikonal = [&](uint32_t x, uint32_t y) {
        double tx = kInf, ty = kInf;
        if (x > 0 && flag[idx(x - 1, y)] == KNOWN) tx = tdist[idx(x - 1, y)];
        if (x + 1 < w && flag[idx(x + 1, y)] == KNOWN)
            tx = std::min(tx, tdist[idx(x + 1, y)]);
        if (y > 0 && flag[idx(x, y - 1)] == KNOWN) ty = tdist[idx(x, y - 1)];
        if (y + 1 < h && flag[idx(x, y + 1)] == KNOWN)
            ty = std::min(ty, tdist[idx(x, y + 1)]);
        if (tx == kInf && ty == kInf) return kInf;
        if (tx == kInf) return ty + 1.0;
        if (ty == kInf) return tx + 1.0;
        const double d = std::abs(tx - ty);
        if (d >= 1.0) return std::min(tx, ty) + 1.0;
        return 0.5 * (tx + ty + std::sqrt(2.0 - d * d));
    };

    using HeapItem = std::pair<double, std::size_t>;
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;

    for (uint32_t y = region.y; y < region.bottom(); ++y)
        for (uint32_t x = region.x; x < region.right(); ++x) {
            const bool edge =
                (x > 0 && flag[idx(x - 1, y)] == KNOWN) ||
                (x + 1 < w && flag[idx(x + 1, y)] == KNOWN) ||
                (y > 0 && flag[idx(x, y - 1)] == KNOWN) ||
                (y + 1 < h && flag[idx(x, y + 1)] == KNOWN);
            if (!edge) continue;
            const double t = eikonal(x, y);
            tdist[idx(x, y)] = t;
            flag[idx(x, y)] = BAND;
            heap.push({t, idx(x, y)});
        }

    const int rad = int(radius);
    while (!heap.empty()) {
        const auto [t, i] = heap.top();
        heap.pop();
        if (flag[i] == KNOWN || t > tdist[i]) continue;  // stale entry
        const uint32_t px = uint32_t(i % w), py = uint32_t(i / w);
        flag[i] = KNOWN;

        // gradient of the distance field steers the directional weight
        auto grad1 = [&](int x0, int y0, int x1, int y1, double center) {
            const bool k0 = x0 >= 0 && y0 >= 0 && x0 < int(w) && y0 < int(h) &&
                            flag[idx(uint32_t(x0), uint32_t(y0))] == KNOWN;
            const bool k1 = x1 >= 0 && y1 >= 0 && x1 < int(w) && y1 < int(h) &&
                            flag[idx(uint32_t(x1), uint32_t(y1))] == KNOWN;
            if (k0 && k1)
                return 0.5 * (tdist[idx(uint32_t(x1), uint32_t(y1))] -
                              tdist[idx(uint32_t(x0), uint32_t(y0))]);
            if (k1) return tdist[idx(uint32_t(x1), uint32_t(y1))] - center;
            if (k0) return center - tdist[idx(uint32_t(x0), uint32_t(y0))];
            return 0.0;
        };
        const double gx = grad1(int(px) - 1, int(py), int(px) + 1, int(py), tdist[i]);
        const double gy = grad1(int(px), int(py) - 1, int(px), int(py) + 1, tdist[i]);
        const double gn = std::sqrt(gx * gx + gy * gy);

        std::array<double, 4> acc{};
        double wsum = 0.0;
        for (int dy = -rad; dy <= rad; ++dy) {
            const int qy = int(py) + dy;
            if (qy < 0 || qy >= int(h)) continue;
            for (int dx = -rad; dx <= rad; ++dx) {
                const int qx = int(px) + dx;
                if (qx < 0 || qx >= int(w) || (dx == 0 && dy == 0)) continue;
                const std::size_t qi = idx(uint32_t(qx), uint32_t(qy));
                if (flag[qi] != KNOWN) continue;
                const double d2 = double(dx) * dx + double(dy) * dy;
                if (d2 > double(rad) * rad) continue;
                const double d = std::sqrt(d2);
                double dir = 1.0;
                if (gn > 0.0) {
                    dir = std::abs(double(-dx) * gx + double(-dy) * gy) / (d * gn);
                    if (dir == 0.0) dir = 1e-6;
                }
                const double dst = 1.0 / d2;
                const double lev = 1.0 / (1.0 + std::abs(tdist[qi] - tdist[i]));
                const double wgt = dir * dst * lev;
                for (int c = 0; c < 4; ++c) acc[c] += wgt * value[qi][c];
                wsum += wgt;
            }
        }
        if (wsum > 0.0)
            for (int c = 0; c < 4; ++c)
                value[i][c] = std::clamp(double(llround(acc[c] / wsum)), 0.0, 255.0);

        const std::array<std::pair<int, int>, 4> nbrs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
        for (const auto& [dx, dy] : nbrs) {
            const int qx = int(px) + dx, qy = int(py) + dy;
            if (qx < 0 || qy < 0 || qx >= int(w) || qy >= int(h)) continue;
            const std::size_t qi = idx(uint32_t(qx), uint32_t(qy));
            if (flag[qi] == KNOWN) continue;
            const double nt = eikonal(uint32_t(qx), uint32_t(qy));
            if (nt < tdist[qi]) {
                tdist[qi] = nt;
                flag[qi] = BAND;
                heap.push({nt, qi});
            }
        }
    }

    std::vector<uint8_t> bytes(std::size_t(region.area()) * 4);
    std::size_t o = 0;
    for (uint32_t y = region.y; y < region.bottom(); ++y)
        for (uint32_t x = region.x; x < region.right(); ++x) {
            const auto& v = value[idx(x, y)];
            bytes[o++] = uint8_t(v[0]);
            bytes[o++] = uint8_t(v[1]);
            bytes[o++] = uint8_t(v[2]);
            bytes[o++] = uint8_t(v[3]);
        }
    return make_patch(region, std::move(bytes));
}

// --- scroll detection -------------------------------------------------------------

std::optional<int32_t> detect_scroll(const Frame& prev, const Frame& cur,
                                     uint32_t strip_height, uint32_t search_window,
                                     double min_score) {
    if (prev.width != cur.width || prev.height != cur.height ||
        prev.format != cur.format)
        throw DimensionError("scroll detection needs frames of identical shape");
    if (strip_height == 0) throw ConfigError("strip height must be positive");
    if (strip_height > prev.height) return std::nullopt;

    const GrayImage gp = to_gray(prev);
    const GrayImage gc = to_gray(cur);
    const uint32_t w = prev.width, h = prev.height;
    const uint32_t nstrips = h / strip_height;

    std::vector<int32_t> disps;
    for (uint32_t s = 0; s < nstrips; ++s) {
        const uint32_t y0 = s * strip_height;
        const GrayImage strip = crop(gp, Region{0, y0, w, strip_height});

        const uint32_t lo = y0 > search_window ? y0 - search_window : 0;
        const uint32_t hi = std::min(h - strip_height, y0 + search_window);
        const GrayImage slice = crop(gc, Region{0, lo, w, hi - lo + strip_height});

        const ScoreMap sm = ncc_match(slice, strip);  // width 1, height hi-lo+1
        // best score; ties prefer the smallest displacement magnitude
        uint32_t best = 0;
        double best_score = -1.0;
        for (uint32_t i = 0; i < sm.height; ++i) {
            const double sc = sm.at(0, i);
            const int32_t d = int32_t(y0) - int32_t(lo + i);
            const int32_t bd = int32_t(y0) - int32_t(lo + best);
            const bool better =
                sc > best_score ||
                (sc == best_score &&
                 (std::abs(d) < std::abs(bd) || (std::abs(d) == std::abs(bd) && d < bd)));
            if (better) {
                best = i;
                best_score = sc;
            }
        }
        if (best_score < min_score) continue;

        const uint32_t match_y = lo + best;
        const GrayImage found = crop(gc, Region{0, match_y, w, strip_height});
        if (hamming_distance(average_hash(strip), average_hash(found)) >
            kScrollMaxHashDistance)
            continue;
        disps.push_back(int32_t(y0) - int32_t(match_y));
    }

    if (disps.size() < 3) return std::nullopt;
    std::sort(disps.begin(), disps.end());
    const int32_t median = disps[(disps.size() - 1) / 2];
    if (median == 0) return std::nullopt;
    return median;
}

}  // namespace gtrm::imaging
