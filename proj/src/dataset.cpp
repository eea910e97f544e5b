#include "limekit/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace limekit {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    double value = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto res = std::from_chars(b, e, value);
    if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(value)) {
        throw CsvFormatError("non-numeric cell at row " + std::to_string(row) + ", column " +
                             std::to_string(col) + ": '" + cell + "'");
    }
    return value;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw CsvFormatError("empty CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 2) throw CsvFormatError("CSV needs at least one feature and a label column");
    const std::size_t columns = header.size();

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != columns) {
            throw CsvFormatError("row " + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(columns));
        }
        std::vector<double> row(columns - 1);
        for (std::size_t c = 0; c + 1 < columns; ++c) row[c] = parse_cell(cells[c], line_no, c);
        const double label = parse_cell(cells[columns - 1], line_no, columns - 1);
        if (label != 0.0 && label != 1.0) {
            throw CsvFormatError("label at row " + std::to_string(line_no) +
                                 " must be 0 or 1, got " + cells[columns - 1]);
        }
        rows.push_back(std::move(row));
        labels.push_back(label == 1.0 ? 1 : 0);
    }
    if (rows.size() < 2) throw CsvFormatError("dataset needs at least 2 rows");

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(columns - 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c + 1 < columns; ++c) {
            data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    data.labels = std::move(labels);
    data.feature_names.assign(header.begin(), header.end() - 1);
    return data;
}

}  // namespace limekit
