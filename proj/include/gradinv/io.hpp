#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gradinv/tensor.hpp"

namespace gradinv {

std::string format_g17(double v);

// Checkpoint format: one "[param <name>]" section per tensor, each followed
// by a text-format tensor.
void write_checkpoint(std::ostream& os, const std::vector<std::string>& names, const std::vector<Tensor>& tensors);
std::vector<std::pair<std::string, Tensor>> read_checkpoint(std::istream& is);
void save_checkpoint_file(const std::string& path, const std::vector<std::string>& names,
                          const std::vector<Tensor>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Rows are written as-is; numeric cells should be preformatted with
// format_g17 so reruns stay byte-identical.
class CsvWriter {
  public:
    explicit CsvWriter(std::string header);
    void row(const std::vector<std::string>& cells);
    const std::string& str() const { return buf_; }
    void save(const std::string& path) const;

  private:
    std::string buf_;
    size_t columns_ = 0;
};

void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

}  // namespace gradinv
