#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string_view>
#include <string>
#include <vector>

#include "sinpaint/nn/tensor.hpp"

namespace sinpaint::nn {

/// Named float32 tensor records in the SPTN1 container:
///
///   "SPTN1"
///   repeated until EOF:
///     u64 name_length, name bytes,
///     u64 rank, rank x u64 dims,
///     prod(dims) x f32 values
///
/// All integers and floats are little-endian. Text metadata is stored as
/// rank-1 records named "__meta__.<key>" holding one byte value per float.
class TensorFile {
public:
    static constexpr std::string_view kMagic = "SPTN1";

    void put(const std::string& name, const Tensor& tensor);
    void put(const std::string& name, const Shape& shape, std::vector<float> values);
    void put_text(const std::string& key, const std::string& text);

    bool contains(const std::string& name) const;
    // Throws std::out_of_range naming the missing record.
    Tensor get(const std::string& name) const;
    std::optional<std::string> text(const std::string& key) const;
    // Record names in insertion (file) order, metadata included.
    std::vector<std::string> names() const;

    void save(const std::filesystem::path& path) const;
    static TensorFile load(const std::filesystem::path& path);

    // Serialized bytes; save() writes exactly this.
    std::string serialize() const;
    static TensorFile deserialize(const std::string& bytes, const std::string& origin = "<memory>");

private:
    struct Record {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };
    std::vector<Record> records_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace sinpaint::nn
