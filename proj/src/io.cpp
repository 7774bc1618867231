#include "gradinv/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gradinv {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_checkpoint(std::ostream& os, const std::vector<std::string>& names, const std::vector<Tensor>& tensors) {
    if (names.size() != tensors.size()) throw IoError("checkpoint: names/tensors length mismatch");
    for (size_t i = 0; i < names.size(); ++i) {
        os << "[param " << names[i] << "]\n";
        write_tensor_text(os, tensors[i]);
    }
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(std::istream& is) {
    std::vector<std::pair<std::string, Tensor>> result;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.rfind("[param ", 0) != 0 || line.back() != ']') {
            throw IoError("checkpoint: expected '[param <name>]', got '" + line + "'");
        }
        std::string name = line.substr(7, line.size() - 8);
        result.emplace_back(name, read_tensor_text(is));
        is >> std::ws;
    }
    return result;
}

void save_checkpoint_file(const std::string& path, const std::vector<std::string>& names,
                          const std::vector<Tensor>& tensors) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_checkpoint(os, names, tensors);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    return read_checkpoint(is);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

CsvWriter::CsvWriter(std::string header) {
    columns_ = 1;
    for (char c : header)
        if (c == ',') ++columns_;
    buf_ = std::move(header);
    buf_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw IoError("csv row width mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

void CsvWriter::save(const std::string& path) const { write_text_file(path, buf_); }

void save_tensor_file(const std::string& path, const Tensor& t) { write_text_file(path, tensor_to_string(t)); }

Tensor load_tensor_file(const std::string& path) { return tensor_from_string(read_text_file(path)); }

}  // namespace gradinv
