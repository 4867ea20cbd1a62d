#include "anlg/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace anlg {

const char* relation_name(Relation r) {
    static constexpr const char* kNames[9] = {"oEffect", "oReact", "oWant",
                                              "xAttr",   "xEffect", "xIntent",
                                              "xNeed",   "xReact",  "xWant"};
    return kNames[static_cast<int>(r)];
}

std::optional<Relation> relation_from_name(std::string_view name) {
    for (Relation r : kAllRelations) {
        if (name == relation_name(r)) return r;
    }
    return std::nullopt;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // also trims leading whitespace
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

std::vector<std::string> special_tokens() {
    std::vector<std::string> s = {"<pad>", "<unk>", "<bos>", "<eos>",
                                  "<o1>",  "</o1>", "<o2>",  "</o2>"};
    for (Relation r : kAllRelations) s.push_back(std::string("<") + relation_name(r) + ">");
    return s;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& words) {
    Vocabulary v;
    v.tokens_ = special_tokens();
    v.first_word_ = static_cast<int>(v.tokens_.size());

    std::set<std::string> sorted;
    for (const auto& w : words) {
        const std::string norm = normalize_text(w);
        std::istringstream ss(norm);
        std::string piece;
        while (ss >> piece) sorted.insert(piece);
    }
    for (const auto& w : sorted) {
        if (!w.empty() && w.front() == '<' && w.back() == '>') {
            throw std::invalid_argument("vocabulary word collides with special-token syntax: " + w);
        }
        v.tokens_.push_back(w);
    }
    v.index();
    return v;
}

void Vocabulary::index() {
    by_surface_.clear();
    for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
        if (!by_surface_.emplace(tokens_[i], i).second) {
            throw std::invalid_argument("duplicate vocabulary token: " + tokens_[i]);
        }
    }
    auto need = [&](const char* t) {
        auto it = by_surface_.find(t);
        if (it == by_surface_.end()) throw std::invalid_argument(std::string("missing special token ") + t);
        return it->second;
    };
    pad_ = need("<pad>");
    unk_ = need("<unk>");
    bos_ = need("<bos>");
    eos_ = need("<eos>");
    o1_open_ = need("<o1>");
    o1_close_ = need("</o1>");
    o2_open_ = need("<o2>");
    o2_close_ = need("</o2>");
    for (Relation r : kAllRelations) {
        rel_[static_cast<int>(r)] = need((std::string("<") + relation_name(r) + ">").c_str());
    }
    first_word_ = static_cast<int>(special_tokens().size());
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) v.tokens_.push_back(line);
    }
    const auto specials = special_tokens();
    if (v.tokens_.size() < specials.size() ||
        !std::equal(specials.begin(), specials.end(), v.tokens_.begin())) {
        throw std::runtime_error("vocabulary file does not start with the special-token block: " + path);
    }
    v.index();
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

std::optional<int> Vocabulary::id(std::string_view token) const {
    auto it = by_surface_.find(std::string(token));
    if (it == by_surface_.end()) return std::nullopt;
    return it->second;
}

TokenSeq Vocabulary::tokenize(std::string_view text) const {
    TokenSeq out;
    std::istringstream ss(normalize_text(text));
    std::string piece;
    while (ss >> piece) {
        auto it = by_surface_.find(piece);
        out.push_back(it == by_surface_.end() ? unk_ : it->second);
    }
    return out;
}

std::string Vocabulary::detokenize(const TokenSeq& seq) const {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] < 0 || seq[i] >= size()) {
            throw std::invalid_argument("detokenize: token id out of range: " + std::to_string(seq[i]));
        }
        if (i) out.push_back(' ');
        out += tokens_[seq[i]];
    }
    return out;
}

}  // namespace anlg
