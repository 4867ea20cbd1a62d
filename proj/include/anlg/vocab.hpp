#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "anlg/types.hpp"

namespace anlg {

// The nine commonsense-inference relations, in stable order.
enum class Relation { oEffect, oReact, oWant, xAttr, xEffect, xIntent, xNeed, xReact, xWant };

inline constexpr std::array<Relation, 9> kAllRelations = {
    Relation::oEffect, Relation::oReact, Relation::oWant,
    Relation::xAttr,   Relation::xEffect, Relation::xIntent,
    Relation::xNeed,   Relation::xReact,  Relation::xWant};

const char* relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

// Lowercase, trim, collapse runs of whitespace to single spaces.
std::string normalize_text(std::string_view text);

// Closed word-level vocabulary: dense ids 0..V-1, special tokens first,
// then the corpus words in sorted order.
class Vocabulary {
  public:
    // Builds from a set of surface words (normalized, deduplicated). The
    // specials <pad> <unk> <bos> <eos> <o1> </o1> <o2> </o2> and one marker
    // per relation are always present, so V >= 17.
    static Vocabulary build(const std::vector<std::string>& words);

    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_.at(id); }
    std::optional<int> id(std::string_view token) const;

    int pad() const { return pad_; }
    int unk() const { return unk_; }
    int bos() const { return bos_; }
    int eos() const { return eos_; }
    int o1_open() const { return o1_open_; }
    int o1_close() const { return o1_close_; }
    int o2_open() const { return o2_open_; }
    int o2_close() const { return o2_close_; }
    int rel_marker(Relation r) const { return rel_[static_cast<int>(r)]; }
    bool is_special(int id) const { return id < first_word_; }

    // Word-level tokenization over the closed vocabulary. Text is normalized
    // first; out-of-vocabulary words map to <unk>, never an error.
    TokenSeq tokenize(std::string_view text) const;
    // Joins token surfaces with single spaces (specials render as themselves).
    std::string detokenize(const TokenSeq& seq) const;

  private:
    void index();

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> by_surface_;
    int pad_ = 0, unk_ = 0, bos_ = 0, eos_ = 0;
    int o1_open_ = 0, o1_close_ = 0, o2_open_ = 0, o2_close_ = 0;
    std::array<int, 9> rel_{};
    int first_word_ = 0;
};

}  // namespace anlg
