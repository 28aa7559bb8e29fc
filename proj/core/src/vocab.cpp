#include "svimo/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "svimo/errors.hpp"

namespace svimo {

PromptVocab PromptVocab::grammar_vocab() {
    return from_words({"<pad>", "left", "right", "hand", "uses", "the", "to",
                       "stir", "push", "lift", "rotate", "brush",
                       "box", "cylinder", "sphere", "block", "tube", "ball"});
}

PromptVocab PromptVocab::from_words(std::vector<std::string> words) {
    PromptVocab v;
    v.words_ = std::move(words);
    for (size_t i = 0; i < v.words_.size(); ++i) {
        if (v.index_.count(v.words_[i])) throw ConfigError("vocab: duplicate word " + v.words_[i]);
        v.index_[v.words_[i]] = static_cast<int64_t>(i);
    }
    if (v.words_.empty() || v.words_[0] != "<pad>") throw ConfigError("vocab: word 0 must be <pad>");
    return v;
}

int64_t PromptVocab::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw ConfigError("prompt token '" + word + "' is not in the vocabulary");
    return it->second;
}

std::vector<int64_t> PromptVocab::tokenize(const std::string& prompt, int64_t L) const {
    std::istringstream is(prompt);
    std::vector<int64_t> ids;
    std::string word;
    while (is >> word) {
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        ids.push_back(id(word));
    }
    if (static_cast<int64_t>(ids.size()) > L) {
        throw ConfigError("prompt has " + std::to_string(ids.size()) + " tokens, limit is " +
                          std::to_string(L));
    }
    ids.resize(static_cast<size_t>(L), pad_id());
    return ids;
}

}  // namespace svimo
