// Command-line front end: synthetic scene generation, training, evaluation,
// the ablation studies, map rendering and gradient verification.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.

#include "sits/architectures.hpp"
#include "sits/dataset_io.hpp"
#include "sits/errors.hpp"
#include "sits/eval.hpp"
#include "sits/forest.hpp"
#include "sits/model_io.hpp"
#include "sits/network.hpp"
#include "sits/preprocess.hpp"
#include "sits/rng.hpp"
#include "sits/studies.hpp"
#include "sits/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

std::array<std::uint8_t, 3> parse_color(const std::string& text) {
    if (text.size() != 7 || text[0] != '#') {
        throw sits::DataError("color must look like #RRGGBB, got '" + text + "'");
    }
    const unsigned rgb = static_cast<unsigned>(std::stoul(text.substr(1), nullptr, 16));
    return {static_cast<std::uint8_t>((rgb >> 16) & 0xff), static_cast<std::uint8_t>((rgb >> 8) & 0xff),
            static_cast<std::uint8_t>(rgb & 0xff)};
}

sits::PhenologyProfile parse_profile(const json& j) {
    sits::PhenologyProfile p;
    p.baseline = j.at("baseline").get<double>();
    p.amplitude = j.at("amplitude").get<double>();
    p.green_up_day = j.at("green_up_day").get<double>();
    p.senescence_day = j.at("senescence_day").get<double>();
    p.green_up_rate = j.at("green_up_rate").get<double>();
    p.senescence_rate = j.at("senescence_rate").get<double>();
    return p;
}

sits::SceneSpec parse_scene_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sits::DataError("cannot open scene config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw sits::DataError(path + ": " + e.what());
    }
    try {
        sits::SceneSpec spec;
        if (j.contains("calendar")) {
            spec.calendar = sits::AcquisitionCalendar::irregular(j.at("calendar").get<std::vector<int>>());
        } else {
            spec.calendar = sits::default_calendar();
        }
        if (j.contains("bands")) spec.band_names = j.at("bands").get<std::vector<std::string>>();
        spec.noise_sd = j.value("noise_sd", spec.noise_sd);
        spec.cloud_probability = j.value("cloud_probability", spec.cloud_probability);
        spec.min_pixels_per_polygon = j.value("min_pixels_per_polygon", spec.min_pixels_per_polygon);
        spec.max_pixels_per_polygon = j.value("max_pixels_per_polygon", spec.max_pixels_per_polygon);
        spec.polygon_baseline_sd = j.value("polygon_baseline_sd", spec.polygon_baseline_sd);
        spec.polygon_amplitude_jitter = j.value("polygon_amplitude_jitter", spec.polygon_amplitude_jitter);
        spec.polygon_time_jitter_days = j.value("polygon_time_jitter_days", spec.polygon_time_jitter_days);
        for (const json& jc : j.at("classes")) {
            sits::SceneClass cls;
            cls.name = jc.at("name").get<std::string>();
            cls.color = parse_color(jc.at("color").get<std::string>());
            cls.polygons = jc.at("polygons").get<int>();
            for (const json& jp : jc.at("profiles")) cls.band_profiles.push_back(parse_profile(jp));
            spec.classes.push_back(std::move(cls));
        }
        return spec;
    } catch (const json::exception& e) {
        throw sits::DataError(path + ": " + e.what());
    }
}

// `default`, `shift:<days>`, or a JSON file path.
sits::SceneSpec resolve_scene(const std::string& scene, double noise_sd) {
    if (scene == "default") return sits::default_scene();
    if (scene.rfind("shift:", 0) == 0) {
        const double days = std::stod(scene.substr(6));
        return sits::shift_benchmark_scene(days, noise_sd);
    }
    return parse_scene_file(scene);
}

struct CommonTrainFlags {
    std::string strategy = "sb";
    std::string sampling = "2day";
    std::uint64_t seed = 0;
    int epochs = 20;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 1e-6;
    double dropout = 0.5;
    int patience = 0;
    double val_fraction = 0.05;
    bool no_batchnorm = false;
    bool no_early_stopping = false;

    sits::TrainConfig config() const {
        sits::TrainConfig c;
        c.max_epochs = epochs;
        c.batch_size = batch_size;
        c.lr = lr;
        c.weight_decay = weight_decay;
        c.dropout_rate = dropout;
        c.patience = no_early_stopping ? -1 : patience;
        c.val_fraction = no_early_stopping ? 0.0 : val_fraction;
        c.seed = seed;
        return c;
    }
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& flags) {
    cmd->add_option("--strategy", flags.strategy, "Feature vector: ndvi, sb or sb-sf");
    cmd->add_option("--sampling", flags.sampling, "Temporal sampling: original or 2day");
    cmd->add_option("--seed", flags.seed, "Top-level random seed");
    cmd->add_option("--epochs", flags.epochs, "Maximum training epochs");
    cmd->add_option("--batch-size", flags.batch_size, "Mini-batch size");
    cmd->add_option("--lr", flags.lr, "Adam learning rate");
    cmd->add_option("--weight-decay", flags.weight_decay, "L2 weight decay on weights");
    cmd->add_option("--dropout", flags.dropout, "Dropout rate inside conv/dense blocks");
    cmd->add_option("--patience", flags.patience, "Early stopping patience (epochs)");
    cmd->add_option("--val-fraction", flags.val_fraction, "Polygon share carved out for validation");
    cmd->add_flag("--no-batchnorm", flags.no_batchnorm, "Build without batch normalization");
    cmd->add_flag("--no-early-stopping", flags.no_early_stopping,
                  "Train all epochs without a validation set");
}

void write_history_csv(const sits::TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sits::DataError("cannot write history file: " + path);
    out << "epoch,train_loss,val_loss,val_accuracy,seconds\n";
    for (std::size_t e = 0; e < history.epochs(); ++e) {
        out << e << ',' << history.train_loss[e] << ',' << history.val_loss[e] << ','
            << history.val_accuracy[e] << ',' << history.seconds[e] << '\n';
    }
}

sits::PreparedData prepare_whole_dataset(const sits::Dataset& raw, const sits::PipelineConfig& pipe,
                                         const sits::TrainConfig& config) {
    sits::SplitAssignment split;
    split.fold_id = 0;
    split.train_polygons = raw.polygon_ids();
    if (config.patience >= 0 && config.val_fraction > 0.0) {
        split = sits::carve_validation(split, raw, config.val_fraction, config.seed);
    }
    return sits::prepare_fold(raw, split, pipe);
}

sits::Dataset preprocess_for_model(const sits::TrainedModel& model, const sits::Dataset& raw) {
    if (raw.legend.names != model.legend.names) {
        throw sits::DataError("dataset legend does not match the model's class legend");
    }
    auto calendar = std::make_shared<sits::AcquisitionCalendar>(model.target_calendar);
    sits::Dataset prepared =
        sits::assemble_features_dataset(sits::gapfill_dataset(raw, calendar), model.strategy);
    return sits::apply_normalization(prepared, model.normalization);
}

void print_confusion(const sits::ConfusionMatrix& cm, const sits::ClassLegend& legend) {
    std::cout << "confusion (rows = reference):\n";
    for (int r = 0; r < cm.classes; ++r) {
        std::cout << "  " << legend.names[r] << ':';
        for (int p = 0; p < cm.classes; ++p) std::cout << ' ' << cm.at(r, p);
        std::cout << '\n';
    }
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& scene, const std::string& out, std::uint64_t seed,
              double noise_sd, int grid_rows, int grid_cols, int patch) {
    const sits::SceneSpec spec = resolve_scene(scene, noise_sd);
    sits::Dataset ds;
    if (grid_rows > 0 || grid_cols > 0) {
        ds = sits::generate_grid_scene(spec, grid_rows, grid_cols, patch, seed);
    } else {
        ds = sits::generate_scene(spec, seed);
    }
    sits::write_dataset(ds, out);
    std::cout << "wrote " << ds.size() << " samples, " << ds.num_classes() << " classes, T="
              << ds.time_len() << ", D=" << ds.channels() << " to " << out << '\n';
    const auto hist = ds.class_histogram();
    for (int c = 0; c < ds.num_classes(); ++c) {
        std::cout << "  " << ds.legend.names[c] << ": " << hist[c] << '\n';
    }
    return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& arch, const std::string& out,
              const CommonTrainFlags& flags) {
    const sits::Dataset raw = sits::read_dataset(dataset_path);
    const sits::PipelineConfig pipe{sits::parse_feature_strategy(flags.strategy),
                                    sits::parse_sampling(flags.sampling)};
    const sits::TrainConfig config = flags.config();

    const sits::PreparedData data = prepare_whole_dataset(raw, pipe, config);
    const sits::ArchOptions options{flags.dropout, !flags.no_batchnorm};
    const sits::NetworkSpec spec = sits::build_by_name(arch, data.train.time_len(),
                                                       data.train.channels(), raw.num_classes(),
                                                       options);

    sits::TrainResult result = sits::train(spec, data.train, data.validation, config);

    sits::TrainedModel model{std::move(result.network)};
    model.legend = raw.legend;
    model.strategy = pipe.strategy;
    model.target_calendar = *data.target_calendar;
    model.normalization = data.normalization;
    sits::save_model(model, out);
    write_history_csv(result.history, out + ".history.csv");

    std::cout << "trained " << arch << " (" << sits::param_count(spec) << " parameters) for "
              << result.history.epochs() << " epochs\n";
    if (!result.history.val_loss.empty()) {
        std::cout << "final val loss " << result.history.val_loss.back() << ", best epoch "
                  << result.history.best_epoch << '\n';
    }
    std::cout << "model written to " << out << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& out) {
    sits::TrainedModel model = sits::load_model(model_path);
    const sits::Dataset raw = sits::read_dataset(dataset_path);
    const sits::Dataset prepared = preprocess_for_model(model, raw);

    const std::vector<int> reference = sits::to_labels(prepared);
    const std::vector<int> predicted = sits::predict(model.network, prepared);
    const sits::ConfusionMatrix cm = sits::confusion(reference, predicted, raw.num_classes());
    const double oa = sits::overall_accuracy(cm);

    print_confusion(cm, raw.legend);
    std::cout << "overall_accuracy " << oa << " on " << raw.size() << " samples\n";

    if (!out.empty()) {
        std::ofstream report(out, std::ios::binary);
        if (!report) throw sits::DataError("cannot write report: " + out);
        report << "metric,value\n";
        report << "overall_accuracy," << oa << '\n';
        report << "samples," << raw.size() << '\n';
        report << "classes," << raw.num_classes() << '\n';
        sits::save_confusion_csv(cm, raw.legend, out + ".confusion.csv");
    }
    return 0;
}

int cmd_sweep(const std::string& study, const std::string& dataset_path, const std::string& out,
              int folds, const CommonTrainFlags& flags) {
    const sits::Dataset raw = sits::read_dataset(dataset_path);
    const sits::StudyKind kind = sits::parse_study(study);
    const sits::StudyReport report =
        sits::run_study(raw, kind, flags.config(), folds, flags.seed);
    sits::save_study_csv(report, out);
    sits::save_study_folds_csv(report, out + ".folds.csv");
    std::cout << "study " << study << " over " << folds << " folds\n";
    for (const auto& row : report.rows) {
        std::cout << "  " << row.name << ": OA " << row.oa.mean << " +- " << row.oa.sd << '\n';
    }
    std::cout << "report written to " << out << '\n';
    return 0;
}

int cmd_map(const std::string& model_path, const std::string& model2_path,
            const std::string& dataset_path, int rows, int cols, const std::string& out) {
    const sits::Dataset raw = sits::read_dataset(dataset_path);
    if (raw.size() != rows * cols) {
        throw sits::DataError("dataset holds " + std::to_string(raw.size()) +
                              " samples, expected rows*cols = " + std::to_string(rows * cols));
    }

    sits::TrainedModel model = sits::load_model(model_path);
    const std::vector<int> labels = sits::predict(model.network, preprocess_for_model(model, raw));
    sits::render_map(labels, rows, cols, model.legend, out + ".ppm");
    sits::render_map(sits::to_labels(raw), rows, cols, raw.legend, out + ".reference.ppm");
    std::cout << "wrote " << out << ".ppm and " << out << ".reference.ppm\n";

    if (!model2_path.empty()) {
        sits::TrainedModel model2 = sits::load_model(model2_path);
        const std::vector<int> labels2 =
            sits::predict(model2.network, preprocess_for_model(model2, raw));
        sits::render_map(labels2, rows, cols, model2.legend, out + ".2.ppm");
        sits::disagreement_map(labels, labels2, rows, cols, model.legend, out + ".disagreement.ppm");
        long long disagreements = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != labels2[i]) ++disagreements;
        }
        std::cout << "wrote " << out << ".2.ppm and " << out << ".disagreement.ppm ("
                  << disagreements << " disagreeing pixels)\n";
    }
    return 0;
}

int cmd_gradcheck(const std::string& arch, std::uint64_t seed) {
    // Tiny instance: enough structure to exercise every layer kind while the
    // central differences stay fast.
    const int T = 16, D = 2, C = 3;
    const std::string head = arch.substr(0, arch.find(':'));
    sits::NetworkSpec spec;
    if (head == "tempcnn") {
        spec = sits::build_tempcnn(T, D, C, 4, 3, 5, 8);
    } else if (head == "fc") {
        spec = sits::build_fc_baseline(T, D, C, 8);
    } else if (head == "guidance") {
        spec = sits::build_guidance(sits::parse_guidance(arch.substr(arch.find(':') + 1)), T, D, C,
                                    5, {}, 4, 8);
    } else if (head == "pool") {
        spec = sits::build_pooling_variant(sits::parse_pool_variant(arch.substr(arch.find(':') + 1)),
                                           8, T, D, C, 2, {}, 4, 8);
    } else {
        throw sits::DataError("unknown architecture '" + arch + "'");
    }

    sits::Rng rng(sits::derive_seed(seed, "gradcheck-data"));
    sits::Tensor3 batch(4, T, D);
    for (double& v : batch.data) v = rng.uniform(0.0, 1.0);
    std::vector<int> labels(4);
    for (auto& y : labels) y = static_cast<int>(rng.below(C));

    const double max_rel = sits::gradient_check(spec, batch, labels, 1e-6, seed);
    std::cout << "max relative gradient error: " << max_rel << '\n';
    if (!(max_rel < 1e-4)) {
        throw sits::NumericError("gradient check failed: " + std::to_string(max_rel));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal-CNN classification of satellite image time series"};
    app.require_subcommand(1);

    // synth
    std::string synth_scene = "default", synth_out;
    std::uint64_t synth_seed = 0;
    double synth_noise = 0.02;
    int grid_rows = 0, grid_cols = 0, grid_patch = 8;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic labeled scene");
    synth->add_option("--scene", synth_scene,
                      "default, shift:<days>, or a scene config JSON path");
    synth->add_option("--out", synth_out, "Output dataset CSV path")->required();
    synth->add_option("--seed", synth_seed, "Random seed");
    synth->add_option("--noise-sd", synth_noise, "Noise level for shift:<days> scenes");
    synth->add_option("--grid-rows", grid_rows, "Emit a row-major raster with this many rows");
    synth->add_option("--grid-cols", grid_cols, "Raster columns");
    synth->add_option("--patch", grid_patch, "Raster polygon patch size in pixels");

    // train
    std::string train_dataset, train_arch = "tempcnn", train_out;
    CommonTrainFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "Train a network on a dataset");
    train->add_option("--dataset", train_dataset, "Dataset CSV path")->required();
    train->add_option("--arch", train_arch,
                      "Architecture name: tempcnn[:width=..,depth=..,filter=..,dense=..], fc, "
                      "guidance:{none|temporal|spectral|spectro-temporal}, "
                      "pool:{mp|ap|mp+gap|ap+gap|gap}:reach=<days>");
    train->add_option("--out", train_out, "Output model path")->required();
    add_train_flags(train, train_flags);

    // eval
    std::string eval_model, eval_dataset, eval_out;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a trained model on a dataset");
    eval->add_option("--model", eval_model, "Model path")->required();
    eval->add_option("--dataset", eval_dataset, "Dataset CSV path")->required();
    eval->add_option("--out", eval_out, "Report CSV path");

    // sweep
    std::string sweep_study, sweep_dataset, sweep_out;
    int sweep_folds = 5;
    CommonTrainFlags sweep_flags;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "Run an ablation study: guidance, reach, pooling, width, depth, "
                 "regularization or batch");
    sweep->add_option("--study", sweep_study, "Study name")->required();
    sweep->add_option("--dataset", sweep_dataset, "Dataset CSV path")->required();
    sweep->add_option("--out", sweep_out, "Aggregate report CSV path")->required();
    sweep->add_option("--folds", sweep_folds, "Polygon folds");
    add_train_flags(sweep, sweep_flags);

    // map
    std::string map_model, map_model2, map_dataset, map_out;
    int map_rows = 0, map_cols = 0;
    CLI::App* map_cmd = app.add_subcommand("map", "Render land-cover maps from a raster dataset");
    map_cmd->add_option("--model", map_model, "Model path")->required();
    map_cmd->add_option("--model2", map_model2, "Second model (adds a disagreement map)");
    map_cmd->add_option("--dataset", map_dataset, "Row-major raster dataset CSV")->required();
    map_cmd->add_option("--rows", map_rows, "Raster rows")->required();
    map_cmd->add_option("--cols", map_cols, "Raster columns")->required();
    map_cmd->add_option("--out", map_out, "Output image path prefix")->required();

    // gradcheck
    std::string gc_arch = "tempcnn";
    std::uint64_t gc_seed = 0;
    CLI::App* gradcheck = app.add_subcommand("gradcheck",
                                             "Verify analytic gradients against finite differences");
    gradcheck->add_option("--arch", gc_arch, "Architecture name");
    gradcheck->add_option("--seed", gc_seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse message
        return code == 0 ? 0 : 1;     // usage problems exit with 1
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_scene, synth_out, synth_seed, synth_noise, grid_rows, grid_cols,
                             grid_patch);
        }
        if (train->parsed()) return cmd_train(train_dataset, train_arch, train_out, train_flags);
        if (eval->parsed()) return cmd_eval(eval_model, eval_dataset, eval_out);
        if (sweep->parsed()) {
            return cmd_sweep(sweep_study, sweep_dataset, sweep_out, sweep_folds, sweep_flags);
        }
        if (map_cmd->parsed()) {
            return cmd_map(map_model, map_model2, map_dataset, map_rows, map_cols, map_out);
        }
        if (gradcheck->parsed()) return cmd_gradcheck(gc_arch, gc_seed);
    } catch (const sits::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const sits::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
