#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uatlab/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t comma = text.find(',', begin);
        const std::string item = text.substr(
            begin, comma == std::string::npos ? std::string::npos : comma - begin);
        if (item.empty()) {
            throw uatlab::ConfigError("bad --seeds list '" + text + "'");
        }
        seeds.push_back(std::stoull(item));
        if (comma == std::string::npos) {
            break;
        }
        begin = comma + 1;
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uatlab: multi-corpus seq2seq training with dynamic data scheduling"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string seeds_text;
    std::vector<std::string> overrides;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON experiment config, or a manifest.json")
            ->required();
        cmd->add_option("--out", out_dir, "output directory (must not hold a previous run)")
            ->required();
        cmd->add_option("--seeds", seeds_text, "comma-separated seed override, e.g. 1,2,3");
        cmd->add_option("--override", overrides,
                        "dot-path config override, e.g. train.steps=500 (repeatable)");
    };

    add_common(app.add_subcommand("train", "train one method across seeds and score it"));
    add_common(app.add_subcommand("sweep-priors",
                                  "train one dynamic method across warm-start priors"));
    add_common(app.add_subcommand("transfer-matrix",
                                  "single-corpus models evaluated on every test set"));
    add_common(app.add_subcommand("cosine-matrix",
                                  "averaged dev/train gradient-cosine matrix from a dds run"));

    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json config_json = uatlab::load_config_json(config_path);
        for (const std::string& assignment : overrides) {
            uatlab::apply_override(config_json, assignment);
        }
        if (!seeds_text.empty()) {
            config_json["seeds"] = parse_seed_list(seeds_text);
        }

        const std::string subcommand = app.get_subcommands().front()->get_name();
        if (config_json.contains("experiment") &&
            config_json.at("experiment").get<std::string>() != subcommand) {
            throw uatlab::ConfigError("config declares experiment '" +
                                      config_json.at("experiment").get<std::string>() +
                                      "' but the subcommand is '" + subcommand + "'");
        }
        config_json["experiment"] = subcommand;
        const uatlab::ExperimentConfig config = uatlab::parse_experiment_config(config_json);

        if (subcommand == "train") {
            const uatlab::TrainSummary summary = uatlab::run_train(config, out_dir);
            std::printf("median macro BLEU: %.2f\n", summary.median_macro_bleu);
            for (std::size_t n = 0; n < summary.corpus_names.size(); ++n) {
                std::printf("  %-16s bleu %6.2f   final p %.4f\n",
                            summary.corpus_names[n].c_str(), summary.median_per_corpus_bleu[n],
                            summary.median_final_distribution[n]);
            }
        } else if (subcommand == "sweep-priors") {
            const uatlab::SweepSummary sweep = uatlab::run_sweep_priors(config, out_dir);
            for (const auto& [pair, tv] : sweep.median_pairwise_tv) {
                std::printf("TV(%s): %.4f\n", pair.c_str(), tv);
            }
            std::printf("max pairwise TV: %.4f\n", sweep.max_median_tv);
        } else if (subcommand == "transfer-matrix") {
            const uatlab::ResultTable table = uatlab::run_transfer_matrix(config, out_dir);
            std::fputs(table.to_text().c_str(), stdout);
        } else {
            const uatlab::CosineMatrixSummary matrix = uatlab::run_cosine_matrix(config, out_dir);
            std::printf("accumulated %zu seed matrices over %zu corpora\n",
                        matrix.per_seed_matrices.size(), matrix.corpus_names.size());
        }
        std::printf("artifacts written to %s\n", out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
