#include "lores/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "lores/errors.hpp"
#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace lores {

bool valid_lang_code(const std::string& code) {
    if (code.size() < 2 || code.size() > 3) return false;
    for (char c : code)
        if (c < 'a' || c > 'z') return false;
    return true;
}

LangTag::LangTag(std::string c) : code(std::move(c)) {
    if (!valid_lang_code(code)) fail("InvalidLangTag", "bad language code '" + code + "'");
}

const char* origin_name(Origin o) {
    switch (o) {
        case Origin::parallel: return "parallel";
        case Origin::bridge: return "bridge";
        case Origin::synthetic: return "synthetic";
    }
    return "?";
}

SentencePair make_pair(std::string src_text, std::string tgt_text, LangTag src_lang,
                       LangTag tgt_lang, Origin origin) {
    if (trim(src_text).empty() || trim(tgt_text).empty())
        fail("EmptyLine", "sentence empty after trimming");
    if (src_text.find('\n') != std::string::npos || tgt_text.find('\n') != std::string::npos)
        fail("InteriorNewline", "sentence contains a newline");
    if (src_lang == tgt_lang)
        fail("SameLanguagePair", "src and tgt language are both '" + src_lang.code + "'");
    return SentencePair{std::move(src_text), std::move(tgt_text), std::move(src_lang),
                        std::move(tgt_lang), origin};
}

namespace {

std::vector<std::string> load_side(const std::string& path) {
    auto lines = read_lines(path);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!utf8_valid(lines[i]))
            fail("InvalidEncoding", path + " line " + std::to_string(i + 1) +
                                        " is not valid UTF-8");
    }
    return lines;
}

}  // namespace

Corpus ingest_parallel(const std::string& src_path, const std::string& tgt_path,
                       const LangTag& src_lang, const LangTag& tgt_lang) {
    auto src_lines = load_side(src_path);
    auto tgt_lines = load_side(tgt_path);
    if (src_lines.size() != tgt_lines.size())
        fail("LineCountMismatch", src_path + " has " + std::to_string(src_lines.size()) +
                                      " lines, " + tgt_path + " has " +
                                      std::to_string(tgt_lines.size()));
    Corpus c;
    c.provenance = src_path + "|" + tgt_path;
    c.pairs.reserve(src_lines.size());
    for (size_t i = 0; i < src_lines.size(); ++i) {
        if (trim(src_lines[i]).empty())
            fail("EmptyLine", src_path + " line " + std::to_string(i + 1) + " is empty");
        if (trim(tgt_lines[i]).empty())
            fail("EmptyLine", tgt_path + " line " + std::to_string(i + 1) + " is empty");
        c.pairs.push_back(SentencePair{std::move(src_lines[i]), std::move(tgt_lines[i]),
                                       src_lang, tgt_lang, Origin::parallel});
    }
    return c;
}

void write_parallel(const Corpus& c, const std::string& src_path, const std::string& tgt_path) {
    std::string src, tgt;
    for (const auto& p : c.pairs) {
        src += p.src_text;
        src += '\n';
        tgt += p.tgt_text;
        tgt += '\n';
    }
    write_file(src_path, src);
    write_file(tgt_path, tgt);
}

Corpus clean_and_dedup(const Corpus& c, size_t max_len, double max_ratio) {
    if (max_len < 1) fail("InvalidFilter", "max_len must be >= 1");
    if (max_ratio < 1.0) fail("InvalidFilter", "max_ratio must be >= 1");
    Corpus out;
    out.provenance = c.provenance;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : c.pairs) {
        const auto key = std::make_pair(trim(p.src_text), trim(p.tgt_text));
        if (seen.count(key)) continue;
        const size_t ns = split_ws(p.src_text).size();
        const size_t nt = split_ws(p.tgt_text).size();
        if (ns > max_len || nt > max_len) continue;
        const double hi = static_cast<double>(std::max(ns, nt));
        const double lo = static_cast<double>(std::min(ns, nt));
        if (lo > 0 && hi / lo > max_ratio) continue;
        seen.insert(key);
        out.pairs.push_back(p);
    }
    return out;
}

SplitResult split_corpus(const Corpus& c, double dev_frac, double test_frac, uint64_t seed) {
    if (dev_frac < 0 || test_frac < 0 || dev_frac + test_frac >= 1.0)
        fail("FractionsOutOfRange", "need 0 <= dev_frac + test_frac < 1, got dev=" +
                                        std::to_string(dev_frac) +
                                        " test=" + std::to_string(test_frac));
    const size_t n = c.pairs.size();
    const size_t n_dev = static_cast<size_t>(std::llround(dev_frac * static_cast<double>(n)));
    const size_t n_test = static_cast<size_t>(std::llround(test_frac * static_cast<double>(n)));

    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    shuffle(perm, rng);

    std::vector<int> role(n, 0);  // 0 train, 1 dev, 2 test
    for (size_t i = 0; i < n_dev && i < n; ++i) role[perm[i]] = 1;
    for (size_t i = n_dev; i < n_dev + n_test && i < n; ++i) role[perm[i]] = 2;

    SplitResult r;
    r.train.provenance = c.provenance + "|train";
    r.dev.provenance = c.provenance + "|dev";
    r.test.provenance = c.provenance + "|test";
    for (size_t i = 0; i < n; ++i) {
        if (role[i] == 0)
            r.train.pairs.push_back(c.pairs[i]);
        else if (role[i] == 1)
            r.dev.pairs.push_back(c.pairs[i]);
        else
            r.test.pairs.push_back(c.pairs[i]);
    }
    return r;
}

std::vector<TriRow> ingest_trilingual(const std::string& tsv_path) {
    auto lines = read_lines(tsv_path);
    if (lines.empty()) fail("BadHeader", tsv_path + " is empty");
    if (!utf8_valid(lines[0]) || lines[0] != "sc\ten\tit")
        fail("BadHeader", tsv_path + " must start with 'sc<TAB>en<TAB>it'");
    std::vector<TriRow> rows;
    rows.reserve(lines.size() - 1);
    for (size_t i = 1; i < lines.size(); ++i) {
        const size_t line_no = i + 1;
        if (!utf8_valid(lines[i]))
            fail("InvalidEncoding",
                 tsv_path + " line " + std::to_string(line_no) + " is not valid UTF-8");
        auto cols = split_char(lines[i], '\t');
        if (cols.size() != 3)
            fail("ColumnCountMismatch", tsv_path + " line " + std::to_string(line_no) + " has " +
                                            std::to_string(cols.size()) + " columns");
        for (const auto& col : cols)
            if (trim(col).empty())
                fail("EmptyField", tsv_path + " line " + std::to_string(line_no) +
                                       " has an empty column");
        rows.push_back(TriRow{cols[0], cols[1], cols[2]});
    }
    return rows;
}

void write_trilingual(const std::vector<TriRow>& rows, const std::string& tsv_path) {
    std::string out = "sc\ten\tit\n";
    for (const auto& r : rows) {
        out += r.sc;
        out += '\t';
        out += r.en;
        out += '\t';
        out += r.it;
        out += '\n';
    }
    write_file(tsv_path, out);
}

}  // namespace lores
