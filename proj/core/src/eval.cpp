#include "sits/eval.hpp"

#include "sits/errors.hpp"
#include "sits/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace sits {

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int c = 0; c < classes; ++c) t += at(c, c);
    return t;
}

ConfusionMatrix confusion(std::span<const int> reference, std::span<const int> predicted,
                          int classes) {
    if (reference.size() != predicted.size()) {
        throw std::invalid_argument("confusion: reference/prediction length mismatch");
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const int r = reference[i], p = predicted[i];
        if (r < 0 || r >= classes || p < 0 || p >= classes) {
            throw std::invalid_argument("confusion: label outside [0, C)");
        }
        cm.at(r, p)++;
    }
    return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("overall accuracy of an empty matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double pair_accuracy(const ConfusionMatrix& cm, int class_a, int class_b) {
    std::int64_t correct = cm.at(class_a, class_a) + cm.at(class_b, class_b);
    std::int64_t total = 0;
    for (int p = 0; p < cm.classes; ++p) total += cm.at(class_a, p) + cm.at(class_b, p);
    if (total == 0) throw std::invalid_argument("pair accuracy over an empty pair");
    return static_cast<double>(correct) / static_cast<double>(total);
}

void save_confusion_csv(const ConfusionMatrix& cm, const ClassLegend& legend,
                        const std::string& path) {
    if (legend.size() != cm.classes) throw DataError("legend does not match confusion matrix size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write confusion matrix: " + path);
    out << "reference\\prediction";
    for (const auto& name : legend.names) out << ',' << name;
    out << '\n';
    for (int r = 0; r < cm.classes; ++r) {
        out << legend.names[r];
        for (int p = 0; p < cm.classes; ++p) out << ',' << cm.at(r, p);
        out << '\n';
    }
    if (!out) throw DataError("failed writing confusion matrix: " + path);
}

namespace {

struct PolygonInfo {
    std::string id;
    int label = 0;
    std::int64_t pixels = 0;
};

std::map<std::string, PolygonInfo> polygon_table(const Dataset& dataset) {
    std::map<std::string, PolygonInfo> table;
    for (const auto& s : dataset.samples) {
        auto& info = table[s.polygon_id];
        if (info.pixels == 0) {
            info.id = s.polygon_id;
            info.label = s.label;
        } else if (info.label != s.label) {
            throw DataError("polygon '" + s.polygon_id + "' carries more than one class label");
        }
        info.pixels++;
    }
    return table;
}

} // namespace

std::vector<SplitAssignment> polygon_split(const Dataset& dataset, double train_fraction,
                                           int n_folds, std::uint64_t seed) {
    if (dataset.samples.empty()) throw DataError("cannot split an empty dataset");
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw std::invalid_argument("train fraction must be inside (0, 1)");
    }
    if (n_folds < 1) throw std::invalid_argument("need at least one fold");

    const auto table = polygon_table(dataset);
    std::vector<std::vector<PolygonInfo>> per_class(dataset.num_classes());
    for (const auto& [id, info] : table) per_class[info.label].push_back(info);

    std::vector<SplitAssignment> folds;
    for (int fold = 0; fold < n_folds; ++fold) {
        SplitAssignment split;
        split.fold_id = fold;
        Rng rng(derive_seed(seed, "fold", static_cast<std::uint64_t>(fold)));

        for (int c = 0; c < dataset.num_classes(); ++c) {
            auto polys = per_class[c];
            if (polys.empty()) continue;
            if (polys.size() == 1) {
                split.train_polygons.insert(polys.front().id);
                split.warnings.push_back("class '" + dataset.legend.names[c] +
                                         "' has a single polygon; assigned to train");
                continue;
            }
            rng.shuffle(polys);
            std::int64_t class_pixels = 0;
            for (const auto& p : polys) class_pixels += p.pixels;
            const double target = train_fraction * static_cast<double>(class_pixels);

            // Greedy by pixel count: fill train until the next polygon would
            // overshoot the target more than undershooting it, keeping at
            // least one polygon on each side.
            std::int64_t train_pixels = 0;
            std::size_t taken = 0;
            for (; taken < polys.size() - 1; ++taken) {
                const std::int64_t next = train_pixels + polys[taken].pixels;
                if (taken > 0 &&
                    std::abs(static_cast<double>(next) - target) >
                        std::abs(static_cast<double>(train_pixels) - target)) {
                    break;
                }
                train_pixels = next;
            }
            for (std::size_t i = 0; i < polys.size(); ++i) {
                (i < taken ? split.train_polygons : split.test_polygons).insert(polys[i].id);
            }
        }
        split.check_disjoint();
        folds.push_back(std::move(split));
    }
    return folds;
}

SplitAssignment carve_validation(const SplitAssignment& split, const Dataset& dataset,
                                 double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0) {
        throw std::invalid_argument("validation fraction must be inside [0, 1)");
    }
    SplitAssignment out = split;
    if (fraction == 0.0) return out;

    const auto table = polygon_table(dataset);
    std::vector<PolygonInfo> train_polys;
    std::int64_t train_pixels = 0;
    std::map<int, int> class_poly_count;
    for (const auto& id : split.train_polygons) {
        const auto it = table.find(id);
        if (it == table.end()) throw DataError("split names unknown polygon '" + id + "'");
        train_polys.push_back(it->second);
        train_pixels += it->second.pixels;
        class_poly_count[it->second.label]++;
    }

    Rng rng(derive_seed(seed, "validation", static_cast<std::uint64_t>(split.fold_id)));
    rng.shuffle(train_polys);

    const double target = fraction * static_cast<double>(train_pixels);
    std::int64_t val_pixels = 0;
    for (const auto& p : train_polys) {
        if (static_cast<double>(val_pixels) >= target) break;
        if (class_poly_count[p.label] <= 1) continue;  // keep the class trainable
        // Skip polygons that would overshoot the target by more than the
        // current undershoot; a smaller one later in the shuffle may fit.
        const double with = static_cast<double>(val_pixels + p.pixels);
        if (val_pixels > 0 && with - target > target - static_cast<double>(val_pixels)) continue;
        out.train_polygons.erase(p.id);
        out.validation_polygons.insert(p.id);
        class_poly_count[p.label]--;
        val_pixels += p.pixels;
    }
    out.check_disjoint();
    return out;
}

Aggregate aggregate_folds(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("aggregate of zero folds");
    Aggregate agg;
    for (const double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return agg;
}

Aggregate aggregate_oa(std::span<const FoldResult> results) {
    std::vector<double> oa;
    oa.reserve(results.size());
    for (const auto& r : results) oa.push_back(r.overall_accuracy);
    return aggregate_folds(oa);
}

namespace {

void write_ppm(const PpmImage& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);
    out << "P6\n" << image.cols << ' ' << image.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size() * 3));
    if (!out) throw DataError("failed writing image: " + path);
}

void check_grid(std::size_t labels, int rows, int cols) {
    if (rows < 1 || cols < 1 || labels != static_cast<std::size_t>(rows) * cols) {
        throw DataError("label count " + std::to_string(labels) + " does not fill a " +
                        std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    }
}

} // namespace

void render_map(std::span<const int> labels, int rows, int cols, const ClassLegend& legend,
                const std::string& path) {
    check_grid(labels.size(), rows, cols);
    PpmImage image{rows, cols, {}};
    image.pixels.reserve(labels.size());
    for (const int label : labels) {
        if (label < 0 || label >= legend.size()) {
            throw DataError("label " + std::to_string(label) + " outside the legend");
        }
        image.pixels.push_back(legend.colors[label]);
    }
    write_ppm(image, path);
}

void disagreement_map(std::span<const int> labels_a, std::span<const int> labels_b, int rows,
                      int cols, const ClassLegend& legend, const std::string& path) {
    check_grid(labels_a.size(), rows, cols);
    if (labels_a.size() != labels_b.size()) {
        throw DataError("disagreement map needs equally sized label grids");
    }
    PpmImage image{rows, cols, {}};
    image.pixels.reserve(labels_a.size());
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        if (labels_a[i] != labels_b[i]) {
            image.pixels.push_back({255, 0, 0});
        } else {
            const auto& c = legend.colors.at(labels_a[i]);
            image.pixels.push_back({static_cast<std::uint8_t>(c[0] / 2),
                                    static_cast<std::uint8_t>(c[1] / 2),
                                    static_cast<std::uint8_t>(c[2] / 2)});
        }
    }
    write_ppm(image, path);
}

PpmImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    std::string magic;
    int cols = 0, rows = 0, maxval = 0;
    in >> magic >> cols >> rows >> maxval;
    if (magic != "P6" || maxval != 255 || cols < 1 || rows < 1) {
        throw DataError(path + " is not a 8-bit binary PPM");
    }
    in.get();  // single whitespace after the header
    PpmImage image{rows, cols, {}};
    image.pixels.resize(static_cast<std::size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size() * 3));
    if (!in) throw DataError(path + ": truncated image data");
    return image;
}

} // namespace sits
