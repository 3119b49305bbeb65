#include "lores/model/vocab.hpp"

#include <algorithm>
#include <map>

#include "lores/errors.hpp"
#include "lores/text.hpp"

namespace lores::model {

Vocab::Vocab() {
    add("<pad>");
    add("<s>");
    add("</s>");
}

int Vocab::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) lores::fail("OOVToken", "'" + token + "' is not in the vocabulary");
    return it->second;
}

bool Vocab::contains(const std::string& token) const { return ids_.count(token) > 0; }

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) lores::fail("OOVToken", "id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

std::string Vocab::serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

Vocab Vocab::deserialize(const std::string& text) {
    Vocab v;
    const auto lines = lores::split_char(text, '\n');
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty() && i + 1 == lines.size()) break;  // trailing newline
        if (i < 3) {
            if (lines[i] != v.tokens_[i])
                lores::fail("BadVocabFile", "line " + std::to_string(i + 1) +
                                                " must be the reserved token " + v.tokens_[i]);
            continue;
        }
        v.add(lines[i]);
    }
    return v;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& token_lines,
                  const std::vector<std::string>& langs) {
    Vocab v;
    std::vector<std::string> sorted_langs = langs;
    std::sort(sorted_langs.begin(), sorted_langs.end());
    for (const auto& lang : sorted_langs) v.add("<2" + lang + ">");

    std::map<std::string, int64_t> counts;
    for (const auto& line : token_lines)
        for (const auto& tok : line) ++counts[tok];

    std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [tok, _] : items) v.add(tok);
    return v;
}

}  // namespace lores::model
