#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace svimo {

// Word-level vocabulary over the prompt template grammar
// "<left|right> hand uses the <tool> to <action> the <target>".
// Index 0 is the pad id; ordering is fixed so ids are stable across runs.
class PromptVocab {
public:
    static PromptVocab grammar_vocab();
    static PromptVocab from_words(std::vector<std::string> words);

    int64_t size() const { return static_cast<int64_t>(words_.size()); }
    int64_t pad_id() const { return 0; }
    int64_t id(const std::string& word) const;  // throws, naming the token, on OOV

    // Lowercase whitespace tokenization, right-padded to length L.
    std::vector<int64_t> tokenize(const std::string& prompt, int64_t L) const;

    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int64_t> index_;
};

}  // namespace svimo
