#pragma once

#include <stdexcept>
#include <string>

namespace factcheck {

struct ZeroVector : std::runtime_error {
    explicit ZeroVector(const std::string& msg = "cosine of a zero vector") : std::runtime_error(msg) {}
};

struct EmptyBatch : std::runtime_error {
    explicit EmptyBatch(const std::string& msg = "empty batch") : std::runtime_error(msg) {}
};

struct EmptyEvidence : std::runtime_error {
    explicit EmptyEvidence(const std::string& msg = "evidence sequence is empty") : std::runtime_error(msg) {}
};

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteLoss : std::runtime_error {
    explicit NonFiniteLoss(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackendUnavailable : std::runtime_error {
    explicit BackendUnavailable(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnreadableImage : std::runtime_error {
    explicit UnreadableImage(const std::string& msg) : std::runtime_error(msg) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyReference : std::runtime_error {
    explicit EmptyReference(const std::string& msg = "reference text is empty") : std::runtime_error(msg) {}
};

struct EmptyCandidate : std::runtime_error {
    explicit EmptyCandidate(const std::string& msg = "candidate text is empty") : std::runtime_error(msg) {}
};

struct MissingEmbedding : std::runtime_error {
    explicit MissingEmbedding(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingClass : std::runtime_error {
    explicit MissingClass(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoGold : std::runtime_error {
    explicit NoGold(const std::string& msg = "judgment has no gold items") : std::runtime_error(msg) {}
};

struct NoEvidence : std::runtime_error {
    explicit NoEvidence(const std::string& msg = "claim has no evidence") : std::runtime_error(msg) {}
};

struct SchemaMismatch : std::runtime_error {
    explicit SchemaMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StageFailure : std::runtime_error {
    StageFailure(std::string stage_name, std::string claim, const std::string& msg)
        : std::runtime_error("stage '" + stage_name + "' failed" +
                             (claim.empty() ? "" : " at claim '" + claim + "'") + ": " + msg),
          stage(std::move(stage_name)),
          claim_id(std::move(claim)) {}
    std::string stage;
    std::string claim_id;
};

}  // namespace factcheck
