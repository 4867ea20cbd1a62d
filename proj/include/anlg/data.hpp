#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anlg/knowledge.hpp"
#include "anlg/types.hpp"
#include "anlg/vocab.hpp"

namespace anlg {

// One (past observation, hypothesis, future observation) example.
struct AbductiveInstance {
    std::string id;
    std::string obs1;  // past observation
    std::string obs2;  // future observation
    std::vector<std::string> gold_hyps;  // may be empty at decode time
};

// JSONL schema: {"id": str?, "obs1": str, "obs2": str, "hyps": [str]?}.
// Aliases "hyp", "hyp1", "hyp2" are collected into hyps in that order.
// Unknown fields are ignored; malformed lines raise an error naming the line.
std::vector<AbductiveInstance> load_jsonl(const std::string& path);
void save_jsonl(const std::string& path, const std::vector<AbductiveInstance>& instances);

// ---------------------------------------------------------------------------
// Input layout:  <bos> <o1> obs1 </o1> <o2> obs2 </o2> [knowledge] hyp <eos>
// The knowledge span renders each of the 18 inferences as
// "<relation-marker> inference-tokens", o1 block first.

enum class EncodeVariant { Base, KnowledgeText };

struct EncodedInstance {
    TokenSeq context;  // up to and including the knowledge span
    TokenSeq target;   // hypothesis tokens + <eos>; empty when no hypothesis
    int m = 0;         // obs1 token count
    int n = 0;         // obs2 token count
    int N = 0;         // target length including <eos>
    int knowledge_len = 0;  // tokens occupied by the knowledge span
};

// hyp_override, when given, replaces gold_hyps[0] as the encoded hypothesis.
// On overflow the knowledge span is truncated first; a context that still
// exceeds max_len raises std::length_error.
EncodedInstance encode_instance(const Vocabulary& vocab, const AbductiveInstance& inst,
                                EncodeVariant variant, const KnowledgeBundle* knowledge,
                                int max_len, const std::string* hyp_override = nullptr);

// ---------------------------------------------------------------------------
// Synthetic abductive world: an agent wants an activity, a mishap (the
// hypothesis) breaks or loses one of the activity's items, and the future
// observation reports the aftermath. The templates make the gold hypothesis
// a deterministic function of (obs1, obs2).

struct WorldConfig {
    int n_agents = 8;      // <= 8
    int n_activities = 6;  // <= 6
    int dev_size = -1;     // -1: train size / 6
    int test_size = -1;    // -1: train size / 6
};

struct SynthCorpus {
    std::vector<AbductiveInstance> train, dev, test;
};

// Deterministic in (seed, size, config); train/dev/test are disjoint on
// (agent, activity, mishap) triples. size is the train-split size, >= 30.
SynthCorpus synth_corpus(std::uint64_t seed, int size, const WorldConfig& config = {});

// The closed word list of the world (identical for every seed and size).
std::vector<std::string> synth_vocabulary();

// The generator's inverse lookup: recovers the unique gold hypothesis from
// the observation pair, or nullopt if the pair is not from this world.
std::optional<std::string> synth_inverse_hypothesis(const std::string& obs1,
                                                    const std::string& obs2);

}  // namespace anlg
