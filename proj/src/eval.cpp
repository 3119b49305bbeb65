#include "lores/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lores/errors.hpp"
#include "lores/text.hpp"

namespace lores {

namespace {

bool is_ascii_punct(char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

}  // namespace

std::vector<std::string> bleu_tokenize(const std::string& sentence) {
    std::string spaced;
    spaced.reserve(sentence.size() * 2);
    for (char c : sentence) {
        if (is_ascii_punct(c)) {
            spaced += ' ';
            spaced += c;
            spaced += ' ';
        } else {
            spaced += c;
        }
    }
    return split_ws(spaced);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

struct PairTokens {
    std::vector<std::vector<std::string>> hyp;
    std::vector<std::vector<std::string>> ref;
};

PairTokens tokenize_pairs(const std::vector<std::string>& hypotheses,
                          const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size())
        fail("LengthMismatch", std::to_string(hypotheses.size()) + " hypotheses vs " +
                                   std::to_string(references.size()) + " references");
    if (hypotheses.empty()) fail("EmptyCorpus", "no sentences to score");
    PairTokens out;
    out.hyp.reserve(hypotheses.size());
    out.ref.reserve(references.size());
    for (size_t i = 0; i < hypotheses.size(); ++i) {
        out.hyp.push_back(bleu_tokenize(hypotheses[i]));
        out.ref.push_back(bleu_tokenize(references[i]));
    }
    return out;
}

std::pair<int64_t, int64_t> clipped_counts(const PairTokens& toks, int n) {
    int64_t matches = 0;
    int64_t total = 0;
    for (size_t i = 0; i < toks.hyp.size(); ++i) {
        const auto hyp_ngrams = count_ngrams(toks.hyp[i], n);
        const auto ref_ngrams = count_ngrams(toks.ref[i], n);
        for (const auto& [gram, count] : hyp_ngrams) {
            total += count;
            const auto it = ref_ngrams.find(gram);
            if (it != ref_ngrams.end()) matches += std::min(count, it->second);
        }
    }
    return {matches, total};
}

}  // namespace

std::pair<int64_t, int64_t> ngram_precision(const std::vector<std::string>& hypotheses,
                                            const std::vector<std::string>& references, int n) {
    if (n < 1 || n > 4) fail("InvalidNgramOrder", "n must be in 1..4");
    return clipped_counts(tokenize_pairs(hypotheses, references), n);
}

BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references) {
    const PairTokens toks = tokenize_pairs(hypotheses, references);

    BleuReport rep;
    for (const auto& t : toks.hyp) rep.hyp_len += static_cast<int64_t>(t.size());
    for (const auto& t : toks.ref) rep.ref_len += static_cast<int64_t>(t.size());

    bool any_zero = false;
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const auto [matches, total] = clipped_counts(toks, n);
        // An order with no n-grams anywhere in the corpus is vacuous and
        // does not zero the score (a 3-token identity corpus is still
        // a perfect translation).
        const double p = total == 0 ? 1.0
                                    : static_cast<double>(matches) / static_cast<double>(total);
        rep.precisions[static_cast<size_t>(n - 1)] = p;
        if (p <= 0.0)
            any_zero = true;
        else
            log_sum += std::log(p);
    }

    if (rep.hyp_len == 0) {  // every hypothesis empty: degenerate, score 0
        rep.brevity_penalty = 0.0;
        rep.score = 0.0;
        return rep;
    }
    rep.brevity_penalty =
        rep.hyp_len >= rep.ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(rep.ref_len) / static_cast<double>(rep.hyp_len));

    rep.score = any_zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(0.25 * log_sum);
    return rep;
}

double sentence_bleu_smoothed(const std::string& hypothesis, const std::string& reference) {
    const PairTokens toks = tokenize_pairs({hypothesis}, {reference});
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        auto [matches, total] = clipped_counts(toks, n);
        if (total == 0) {
            log_sum += 0.0;
            continue;
        }
        if (matches == 0) {
            log_sum += std::log(1.0 / (2.0 * static_cast<double>(total)));
            continue;
        }
        log_sum += std::log(static_cast<double>(matches) / static_cast<double>(total));
    }
    const auto c = static_cast<double>(toks.hyp[0].size());
    const auto r = static_cast<double>(toks.ref[0].size());
    const double bp = (c >= r || c == 0) ? (c == 0 ? 0.0 : 1.0) : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(0.25 * log_sum);
}

std::string BleuReport::record() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "BLEU=%.3f P=%.3f/%.3f/%.3f/%.3f BP=%.3f hyp_len=%lld ref_len=%lld", score,
                  precisions[0], precisions[1], precisions[2], precisions[3], brevity_penalty,
                  static_cast<long long>(hyp_len), static_cast<long long>(ref_len));
    return std::string(buf);
}

std::string BleuReport::pretty() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "corpus BLEU %.1f (precisions %.1f/%.1f/%.1f/%.1f, brevity penalty %.3f, "
                  "%lld hypothesis vs %lld reference tokens, tokenizer %s)",
                  score, 100 * precisions[0], 100 * precisions[1], 100 * precisions[2],
                  100 * precisions[3], brevity_penalty, static_cast<long long>(hyp_len),
                  static_cast<long long>(ref_len), kBleuTokenizerVersion);
    return std::string(buf);
}

namespace {

struct Columns {
    std::vector<std::string> langs_subwords;
    std::vector<std::string> langs_tokens;
    std::vector<std::string> directions;
};

Columns collect_columns(const std::vector<ExperimentRow>& rows) {
    Columns cols;
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& row : rows) {
        for (const auto& [lang, _] : row.subwords) add_unique(cols.langs_subwords, lang);
        for (const auto& [lang, _] : row.tokens) add_unique(cols.langs_tokens, lang);
        for (const auto& [dir, _] : row.bleu) add_unique(cols.directions, dir);
    }
    return cols;
}

std::string fmt_bleu(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
}

template <class T>
std::string lookup(const std::vector<std::pair<std::string, T>>& items, const std::string& key,
                   std::string (*fmt)(T)) {
    for (const auto& [k, v] : items)
        if (k == key) return fmt(v);
    return "-";
}

std::string fmt_int(int64_t v) { return std::to_string(v); }

}  // namespace

std::string experiment_report(const std::vector<ExperimentRow>& rows, ReportFormat format) {
    const Columns cols = collect_columns(rows);

    std::vector<std::string> header{"dataset", "subwords", "lines"};
    for (const auto& lang : cols.langs_tokens) header.push_back("tokens:" + lang);
    for (const auto& dir : cols.directions) header.push_back("bleu:" + dir);

    std::vector<std::vector<std::string>> body;
    for (const auto& row : rows) {
        std::vector<std::string> cells;
        cells.push_back(row.dataset);
        std::string sw;
        for (const auto& [lang, size] : row.subwords) {
            if (!sw.empty()) sw += " ";
            sw += lang + ":" + std::to_string(size);
        }
        cells.push_back(sw.empty() ? "-" : sw);
        cells.push_back(std::to_string(row.lines));
        for (const auto& lang : cols.langs_tokens)
            cells.push_back(lookup<int64_t>(row.tokens, lang, fmt_int));
        for (const auto& dir : cols.directions)
            cells.push_back(lookup<double>(row.bleu, dir, fmt_bleu));
        body.push_back(std::move(cells));
    }

    std::ostringstream out;
    if (format == ReportFormat::tsv) {
        out << join(header, "\t") << "\n";
        for (const auto& cells : body) out << join(cells, "\t") << "\n";
    } else {
        out << "| " << join(header, " | ") << " |\n";
        out << "|";
        for (size_t i = 0; i < header.size(); ++i) out << " --- |";
        out << "\n";
        for (const auto& cells : body) out << "| " << join(cells, " | ") << " |\n";
    }
    return out.str();
}

std::string experiment_row_to_json(const ExperimentRow& row) {
    nlohmann::json j;
    j["dataset"] = row.dataset;
    j["lines"] = row.lines;
    j["subwords"] = nlohmann::json::object();
    for (const auto& [lang, size] : row.subwords) j["subwords"][lang] = size;
    j["subword_order"] = nlohmann::json::array();
    for (const auto& [lang, _] : row.subwords) j["subword_order"].push_back(lang);
    j["tokens"] = nlohmann::json::object();
    for (const auto& [lang, count] : row.tokens) j["tokens"][lang] = count;
    j["token_order"] = nlohmann::json::array();
    for (const auto& [lang, _] : row.tokens) j["token_order"].push_back(lang);
    j["bleu"] = nlohmann::json::object();
    for (const auto& [dir, score] : row.bleu) j["bleu"][dir] = score;
    j["bleu_order"] = nlohmann::json::array();
    for (const auto& [dir, _] : row.bleu) j["bleu_order"].push_back(dir);
    return j.dump(2) + "\n";
}

ExperimentRow experiment_row_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ExperimentRow row;
    row.dataset = j.at("dataset").get<std::string>();
    row.lines = j.at("lines").get<int64_t>();
    for (const auto& lang : j.at("subword_order"))
        row.subwords.emplace_back(lang.get<std::string>(),
                                  j.at("subwords").at(lang.get<std::string>()).get<int64_t>());
    for (const auto& lang : j.at("token_order"))
        row.tokens.emplace_back(lang.get<std::string>(),
                                j.at("tokens").at(lang.get<std::string>()).get<int64_t>());
    for (const auto& dir : j.at("bleu_order"))
        row.bleu.emplace_back(dir.get<std::string>(),
                              j.at("bleu").at(dir.get<std::string>()).get<double>());
    return row;
}

}  // namespace lores
