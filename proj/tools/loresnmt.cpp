// loresnmt: low-resource NMT pipeline driver. Every stage is a subcommand;
// `pipeline` runs the whole recipe from one config file.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lores/backtrans.hpp"
#include "lores/errors.hpp"
#include "lores/eval.hpp"
#include "lores/model/nmt.hpp"
#include "lores/pipeline.hpp"
#include "lores/subword.hpp"
#include "lores/text.hpp"

using lores::Error;
namespace pl = lores::pipeline;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    bool deterministic = false;
};

pl::PipelineConfig load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) lores::fail("ConfigError", "--config is required");
    return pl::PipelineConfig::load(opts.config_path, opts.overrides);
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config = true) {
    auto* c = cmd->add_option("-c,--config", opts.config_path, "pipeline config file (JSON)");
    if (needs_config) c->required();
    cmd->add_option("--set", opts.overrides,
                    "override a config key, e.g. --set train.max_updates=500");
    cmd->add_flag("--deterministic", opts.deterministic,
                  "single-threaded bit-reproducible mode (forces LORESNMT_THREADS=1)");
}

void apply_determinism(const CommonOpts& opts) {
    if (opts.deterministic) setenv("LORESNMT_THREADS", "1", 1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "loresnmt - low-resource neural machine translation toolkit\n"
        "Subword-split, train, augment and score small translation models.\n"
        "Worker parallelism is capped by the LORESNMT_THREADS environment variable."};
    app.require_subcommand(1);

    CommonOpts opts;
    bool with_synthetic = false;

    auto* cmd_prepare =
        app.add_subcommand("prepare", "ingest, clean, deduplicate and split the corpora");
    add_common(cmd_prepare, opts);

    auto* cmd_learn = app.add_subcommand("learn-bpe", "learn subword merge tables per side");
    add_common(cmd_learn, opts);

    auto* cmd_assemble =
        app.add_subcommand("assemble", "expand the bridge, oversample and tag directions");
    add_common(cmd_assemble, opts);
    cmd_assemble->add_flag("--with-synthetic", with_synthetic,
                           "include the backtranslated corpus");

    auto* cmd_apply = app.add_subcommand("apply-bpe", "segment the assembled corpora");
    add_common(cmd_apply, opts);
    cmd_apply->add_flag("--with-synthetic", with_synthetic);
    std::string apply_input, apply_output, apply_side = "src";
    cmd_apply->add_option("--input", apply_input, "segment this file instead of the pipeline set");
    cmd_apply->add_option("--output", apply_output, "where to write the segmented file");
    cmd_apply->add_option("--side", apply_side, "merge table to use: src or tgt");

    auto* cmd_train = app.add_subcommand("train", "train the translation model");
    add_common(cmd_train, opts);
    cmd_train->add_flag("--with-synthetic", with_synthetic);

    auto* cmd_backtrans =
        app.add_subcommand("backtranslate", "generate synthetic pairs from monolingual text");
    add_common(cmd_backtrans, opts);

    auto* cmd_evaluate =
        app.add_subcommand("evaluate", "translate the test sets, score them and write the report");
    add_common(cmd_evaluate, opts);

    auto* cmd_pipeline = app.add_subcommand("pipeline", "run the full recipe in order");
    add_common(cmd_pipeline, opts);

    auto* cmd_translate = app.add_subcommand("translate", "translate a file or a single line");
    add_common(cmd_translate, opts, /*needs_config=*/false);
    std::string tr_checkpoint, tr_line, tr_input, tr_output, tr_to;
    int tr_beam = 5;
    double tr_max_len_factor = 2.0;
    cmd_translate->add_option("--checkpoint", tr_checkpoint,
                              "checkpoint directory (defaults to the config's checkpoint)");
    cmd_translate->add_option("--to", tr_to, "target language tag, e.g. en")->required();
    cmd_translate->add_option("--line", tr_line, "translate this raw line and print it");
    cmd_translate->add_option("--input", tr_input, "file of raw sentences, one per line");
    cmd_translate->add_option("--output", tr_output, "where to write translations");
    cmd_translate->add_option("--beam", tr_beam, "beam size");
    cmd_translate->add_option("--max-len-factor", tr_max_len_factor,
                              "output length cap as a multiple of source length");

    auto* cmd_score = app.add_subcommand("score", "corpus BLEU of a hypothesis file");
    std::string sc_hyp, sc_ref;
    cmd_score->add_option("--hyp", sc_hyp, "hypothesis file")->required();
    cmd_score->add_option("--ref", sc_ref, "reference file")->required();

    auto* cmd_report = app.add_subcommand("report", "render experiment rows as a table");
    std::vector<std::string> rp_rows;
    std::string rp_format = "tsv", rp_output;
    cmd_report->add_option("--rows", rp_rows, "experiment_row.json files")->required();
    cmd_report->add_option("--format", rp_format, "tsv or markdown");
    cmd_report->add_option("--output", rp_output, "write the table here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_determinism(opts);

        if (cmd_prepare->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_prepare(cfg);
        } else if (cmd_learn->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_learn_bpe(cfg);
        } else if (cmd_assemble->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_assemble(cfg, with_synthetic);
        } else if (cmd_apply->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            if (!apply_input.empty()) {
                if (apply_output.empty())
                    lores::fail("ConfigError", "--input needs --output");
                const auto mt = lores::read_merges(cfg.output_dir + "/bpe/merges." + apply_side);
                std::string out;
                for (const auto& line : lores::read_lines(apply_input))
                    out += lores::join(lores::segment(mt, line, lores::is_direction_token), " ") +
                           "\n";
                pl::atomic_write(apply_output, out);
            } else {
                pl::stage_apply_bpe(cfg, with_synthetic);
            }
        } else if (cmd_train->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_train(cfg, with_synthetic);
        } else if (cmd_backtrans->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_backtranslate(cfg);
        } else if (cmd_evaluate->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::stage_evaluate(cfg);
        } else if (cmd_pipeline->parsed()) {
            const auto cfg = load_config(opts);
            pl::OutputLock lock(cfg.output_dir);
            pl::run_pipeline(cfg);
        } else if (cmd_translate->parsed()) {
            std::string ck_dir = tr_checkpoint;
            if (ck_dir.empty()) {
                const auto cfg = load_config(opts);
                ck_dir = pl::final_checkpoint_dir(cfg);
            }
            const auto ck = lores::model::load_checkpoint(ck_dir);
            const lores::model::Translator translator(ck);
            const lores::LangTag to(tr_to);
            if (!tr_line.empty()) {
                std::cout << pl::translate_line(ck, translator, tr_line, to, tr_beam,
                                                tr_max_len_factor)
                          << "\n";
            } else if (!tr_input.empty()) {
                std::string out;
                for (const auto& line : lores::read_lines(tr_input))
                    out += pl::translate_line(ck, translator, line, to, tr_beam,
                                              tr_max_len_factor) +
                           "\n";
                if (tr_output.empty())
                    std::cout << out;
                else
                    pl::atomic_write(tr_output, out);
            } else {
                lores::fail("ConfigError", "translate needs --line or --input");
            }
        } else if (cmd_score->parsed()) {
            const auto hyp = lores::read_lines(sc_hyp);
            const auto ref = lores::read_lines(sc_ref);
            const auto rep = lores::corpus_bleu(hyp, ref);
            std::cout << rep.pretty() << "\n" << rep.record() << "\n";
        } else if (cmd_report->parsed()) {
            std::vector<lores::ExperimentRow> rows;
            for (const auto& f : rp_rows)
                rows.push_back(lores::experiment_row_from_json(lores::read_file(f)));
            const auto fmt = rp_format == "markdown" ? lores::ReportFormat::markdown
                                                     : lores::ReportFormat::tsv;
            const std::string table = lores::experiment_report(rows, fmt);
            if (rp_output.empty())
                std::cout << table;
            else
                pl::atomic_write(rp_output, table);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
