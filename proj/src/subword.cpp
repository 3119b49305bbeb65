#include "lores/subword.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "lores/errors.hpp"
#include "lores/text.hpp"

namespace lores {

bool BiasLexicon::contains(const std::string& w) const {
    return std::binary_search(words.begin(), words.end(), w);
}

BiasLexicon lexicon_from_words(std::vector<std::string> words, std::string source) {
    std::set<std::string> uniq;
    for (auto& w : words) {
        const std::string t = trim(w);
        if (t.empty()) continue;
        if (t.find_first_of(" \t") != std::string::npos)
            fail("WhitespaceInLexiconEntry", "lexicon entry '" + t + "' contains whitespace");
        uniq.insert(t);
    }
    if (uniq.empty()) fail("EmptyLexicon", "lexicon has no entries");
    BiasLexicon lex;
    lex.words.assign(uniq.begin(), uniq.end());
    lex.sources.push_back(std::move(source));
    return lex;
}

BiasLexicon build_bias_lexicon(const std::vector<std::string>& word_list_files) {
    std::set<std::string> uniq;
    std::vector<std::string> sources;
    for (const auto& path : word_list_files) {
        for (const auto& line : read_lines(path)) {
            if (!utf8_valid(line)) fail("InvalidEncoding", path + " is not valid UTF-8");
            const std::string w = trim(line);
            if (w.empty()) continue;
            if (w.find_first_of(" \t") != std::string::npos)
                fail("WhitespaceInLexiconEntry",
                     path + ": entry '" + w + "' contains whitespace");
            uniq.insert(w);
        }
        sources.push_back(path);
    }
    if (uniq.empty()) fail("EmptyLexicon", "no entries in any lexicon file");
    BiasLexicon lex;
    lex.words.assign(uniq.begin(), uniq.end());
    lex.sources = std::move(sources);
    return lex;
}

std::map<std::string, int64_t> count_words(const std::vector<std::string>& sentences) {
    std::map<std::string, int64_t> counts;
    for (const auto& s : sentences)
        for (const auto& w : split_ws(s)) ++counts[w];
    return counts;
}

std::vector<std::string> corpus_side(const Corpus& c, Side side) {
    std::vector<std::string> out;
    out.reserve(c.pairs.size());
    for (const auto& p : c.pairs)
        out.push_back(side == Side::source ? p.src_text : p.tgt_text);
    return out;
}

std::map<std::string, int64_t> biased_counts(std::map<std::string, int64_t> counts,
                                             const BiasLexicon* lexicon) {
    if (lexicon)
        for (const auto& w : lexicon->words) counts[w] += 1;
    return counts;
}

namespace {

using Symbols = std::vector<std::string>;

Symbols word_symbols(const std::string& word, const std::string& end_marker) {
    Symbols syms = utf8_chars(word);
    syms.push_back(end_marker);
    return syms;
}

// Replace every non-overlapping (left,right) occurrence, left to right.
void apply_merge(Symbols& syms, const std::string& left, const std::string& right) {
    size_t w = 0;
    for (size_t r = 0; r < syms.size();) {
        if (r + 1 < syms.size() && syms[r] == left && syms[r + 1] == right) {
            syms[w++] = left + right;
            r += 2;
        } else {
            if (w != r) syms[w] = std::move(syms[r]);
            ++w;
            ++r;
        }
    }
    syms.resize(w);
}

}  // namespace

MergeTable learn_merges(const std::map<std::string, int64_t>& word_counts,
                        const BiasLexicon* lexicon, size_t num_merges) {
    const auto counts = biased_counts(word_counts, lexicon);

    MergeTable mt;
    std::vector<Symbols> words;
    std::vector<int64_t> freqs;
    words.reserve(counts.size());
    for (const auto& [word, freq] : counts) {
        if (freq < 1) fail("InvalidWordCount", "count for '" + word + "' is < 1");
        words.push_back(word_symbols(word, mt.end_marker));
        freqs.push_back(freq);
    }

    for (size_t step = 0; step < num_merges; ++step) {
        // Full recount each iteration: symbol inventories are small at the
        // corpus sizes this toolkit targets, and a scan keeps the
        // tie-breaking rule trivially deterministic.
        std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
        for (size_t i = 0; i < words.size(); ++i) {
            const Symbols& syms = words[i];
            for (size_t k = 0; k + 1 < syms.size(); ++k)
                pair_counts[{syms[k], syms[k + 1]}] += freqs[i];
        }
        const std::pair<std::string, std::string>* best = nullptr;
        int64_t best_count = 0;
        for (const auto& [pair, count] : pair_counts) {
            // std::map iterates in ascending key order, so strict > keeps
            // the lexicographically smallest pair among ties.
            if (count > best_count) {
                best = &pair;
                best_count = count;
            }
        }
        if (!best || best_count < 2) break;
        mt.merges.push_back(*best);
        for (auto& syms : words) apply_merge(syms, best->first, best->second);
    }
    return mt;
}

std::vector<std::string> segment_word(const MergeTable& mt, const std::string& word) {
    Symbols syms = word_symbols(word, mt.end_marker);
    for (const auto& [left, right] : mt.merges) apply_merge(syms, left, right);

    // Render: strip the end marker, joiner on all non-final pieces.
    if (!syms.empty()) {
        std::string& last = syms.back();
        if (last == mt.end_marker) {
            syms.pop_back();
        } else if (ends_with(last, mt.end_marker)) {
            last.resize(last.size() - mt.end_marker.size());
        }
    }
    std::vector<std::string> out;
    out.reserve(syms.size());
    for (size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size())
            out.push_back(syms[i] + kJoiner);
        else
            out.push_back(syms[i]);
    }
    return out;
}

std::vector<std::string> segment(const MergeTable& mt, const std::string& sentence,
                                 bool (*is_protected)(const std::string&)) {
    std::vector<std::string> out;
    for (const auto& word : split_ws(sentence)) {
        if (is_protected && is_protected(word)) {
            out.push_back(word);
            continue;
        }
        auto pieces = segment_word(mt, word);
        out.insert(out.end(), pieces.begin(), pieces.end());
    }
    return out;
}

std::string desegment(const std::vector<std::string>& tokens) {
    std::string out;
    bool attach = false;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        const bool joined = ends_with(tok, kJoiner);
        std::string piece = joined ? tok.substr(0, tok.size() - 2) : tok;
        if (joined && i + 1 == tokens.size())
            fail("DanglingJoiner", "final token '" + tok + "' carries the joiner");
        if (!attach && !out.empty()) out += ' ';
        out += piece;
        attach = joined;
    }
    return out;
}

SubwordVocab vocab_from_sentences(const MergeTable& mt,
                                  const std::vector<std::string>& sentences) {
    SubwordVocab v;
    for (const auto& s : sentences)
        for (const auto& tok : segment(mt, s)) ++v.entries[tok];
    return v;
}

SubwordVocab build_subword_vocab(const MergeTable& mt, const Corpus& c, Side side) {
    return vocab_from_sentences(mt, corpus_side(c, side));
}

std::string serialize_merges(const MergeTable& mt) {
    std::ostringstream out;
    out << "#bpe-merges v1 " << mt.merges.size() << " " << mt.end_marker << "\n";
    for (const auto& [left, right] : mt.merges) out << left << " " << right << "\n";
    return out.str();
}

void write_merges(const MergeTable& mt, const std::string& path) {
    write_file(path, serialize_merges(mt));
}

MergeTable read_merges(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) fail("BadMergesFile", path + " is empty");
    auto header = split_ws(lines[0]);
    if (header.size() != 4 || header[0] != "#bpe-merges" || header[1] != "v1")
        fail("BadMergesFile", path + " has an unrecognized header");
    MergeTable mt;
    mt.end_marker = header[3];
    const size_t count = static_cast<size_t>(std::stoull(header[2]));
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto parts = split_ws(lines[i]);
        if (parts.size() != 2)
            fail("BadMergesFile", path + " line " + std::to_string(i + 1) + " is not a pair");
        mt.merges.emplace_back(parts[0], parts[1]);
    }
    if (mt.merges.size() != count)
        fail("BadMergesFile", path + " header count " + std::to_string(count) +
                                  " != " + std::to_string(mt.merges.size()) + " pairs");
    return mt;
}

std::string serialize_vocab(const SubwordVocab& v) {
    std::vector<std::pair<std::string, int64_t>> items(v.entries.begin(), v.entries.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::string out;
    for (const auto& [tok, count] : items) {
        out += tok;
        out += '\t';
        out += std::to_string(count);
        out += '\n';
    }
    return out;
}

void write_vocab(const SubwordVocab& v, const std::string& path) {
    write_file(path, serialize_vocab(v));
}

}  // namespace lores
