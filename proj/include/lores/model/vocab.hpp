#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace lores::model {

// Token <-> id manifest. Ids are dense; 0/1/2 are reserved for
// <pad>/<s>/</s>. Direction tokens and subwords follow in build order.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    Vocab();

    // Adds a token if absent; returns its id.
    int add(const std::string& token);

    // Errors: OOVToken.
    int id(const std::string& token) const;
    bool contains(const std::string& token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    // One token per line, line number = id (specials included).
    std::string serialize() const;
    static Vocab deserialize(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

// Vocabulary from segmented sentences: specials, then direction tokens
// for `langs` (sorted), then corpus tokens by descending count with
// lexicographic tie-break.
Vocab build_vocab(const std::vector<std::vector<std::string>>& token_lines,
                  const std::vector<std::string>& langs);

}  // namespace lores::model
