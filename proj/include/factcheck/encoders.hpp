#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factcheck/errors.hpp"
#include "factcheck/linalg.hpp"

namespace factcheck {

enum class BackendKind { Stub, External };

struct BackendDescriptor {
    BackendKind kind = BackendKind::Stub;
    std::string name = "stub";
    std::size_t dim = 512;
    std::uint64_t seed = 0;
    std::size_t max_sequence_length = 512;

    bool operator==(const BackendDescriptor&) const = default;
};

// Claim and evidence token/patch representations after truncation. Rows are
// tokens (text) or patches (images), columns are the embedding dimension.
struct ClaimEvidenceEncoding {
    Mat claim;
    std::vector<Mat> text_evidence;
    std::vector<Mat> image_evidence;
};

class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;

    virtual const BackendDescriptor& descriptor() const = 0;
    std::size_t dim() const { return descriptor().dim; }
    std::size_t max_sequence_length() const { return descriptor().max_sequence_length; }

    // Pooled unit-norm embedding of a whole string.
    virtual Vec embed_text(std::string_view text) const = 0;
    // Pooled unit-norm embedding of raw image bytes.
    virtual Vec embed_image(const std::vector<std::uint8_t>& bytes) const = 0;
    // One unit-norm row per whitespace token.
    virtual Mat encode_tokens(std::string_view text) const = 0;
    // One unit-norm row per image patch.
    virtual Mat encode_image_patches(const std::vector<std::uint8_t>& bytes) const = 0;
    // Relevance of candidate to claim; higher is more relevant.
    virtual double cross_score(std::string_view claim, std::string_view candidate) const = 0;
};

// Deterministic hash-based backend. Token embeddings share buckets across
// strings, so texts with common tokens score higher under cosine, which is
// what retrieval and verification tests rely on.
class StubBackend : public EncoderBackend {
public:
    explicit StubBackend(const BackendDescriptor& descriptor);

    const BackendDescriptor& descriptor() const override { return descriptor_; }
    Vec embed_text(std::string_view text) const override;
    Vec embed_image(const std::vector<std::uint8_t>& bytes) const override;
    Mat encode_tokens(std::string_view text) const override;
    Mat encode_image_patches(const std::vector<std::uint8_t>& bytes) const override;
    double cross_score(std::string_view claim, std::string_view candidate) const override;

private:
    Vec token_vector(std::string_view token) const;
    Vec bytes_vector(const std::uint8_t* data, std::size_t size) const;

    BackendDescriptor descriptor_;
    std::uint64_t base_;
};

// Builds the backend named by the descriptor. External backends are adapter
// stubs in this build and report themselves unavailable.
std::unique_ptr<EncoderBackend> make_backend(const BackendDescriptor& descriptor);

// Applies the shared truncation policy and encodes claim plus evidence into
// per-unit vectors. The claim always survives in full; evidence items are
// kept in order until the unit budget runs out, the item on the boundary is
// truncated, and anything after it is dropped.
ClaimEvidenceEncoding encode_token_sequence(std::string_view claim,
                                            const std::vector<std::string>& text_evidence,
                                            const std::vector<std::vector<std::uint8_t>>& image_evidence,
                                            const EncoderBackend& backend);

// Line-oriented store for precomputed embeddings: key, dimension, values.
class EmbeddingCache {
public:
    void put(std::string key, Vec embedding);
    const Vec* get(std::string_view key) const;
    std::size_t size() const { return entries_.size(); }

    static EmbeddingCache load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::unordered_map<std::string, Vec> entries_;
};

}  // namespace factcheck
