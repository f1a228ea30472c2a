#include "ccc/dataset.hpp"

#include "ccc/csv.hpp"
#include "ccc/errors.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace ccc {

namespace {

namespace fs = std::filesystem;

void expect_header(csv::Reader& reader, const std::vector<std::string>& expected, bool open_ended,
                   std::vector<std::string_view>& fields) {
    if (!reader.next(fields))
        throw LoadError(reader.file(), "empty file, expected a header row");
    const bool width_ok = open_ended ? fields.size() > expected.size() : fields.size() == expected.size();
    bool names_ok = width_ok;
    for (std::size_t i = 0; names_ok && i < expected.size(); ++i)
        names_ok = fields[i] == expected[i];
    if (!names_ok) {
        std::string want;
        for (const auto& e : expected)
            want += (want.empty() ? "" : ",") + e;
        throw LoadError(reader.file(), reader.line(), "bad header, expected " + want + (open_ended ? ",f1,..." : ""));
    }
}

void expect_width(const csv::Reader& reader, const std::vector<std::string_view>& fields, std::size_t width) {
    if (fields.size() != width)
        throw LoadError(reader.file(), reader.line(),
                        "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
}

void expect_contiguous(const std::set<std::size_t>& ids, const std::string& file, const std::string& what) {
    if (ids.empty())
        throw LoadError(file, "no " + what + " rows");
    std::size_t expected = 1;
    for (auto id : ids) {
        if (id != expected)
            throw LoadError(file, what + " ids are not contiguous: missing " + std::to_string(expected));
        ++expected;
    }
}

RegionGrid read_regions(const fs::path& path, std::optional<double> d_min) {
    csv::Reader reader(path);
    std::vector<std::string_view> fields;
    expect_header(reader, {"region_id", "centroid_x_km", "centroid_y_km"}, false, fields);
    std::map<std::size_t, Eigen::Vector2d> rows;
    while (reader.next(fields)) {
        expect_width(reader, fields, 3);
        const auto id = csv::parse_id(fields[0], reader.file(), reader.line());
        const double x = csv::parse_double(fields[1], reader.file(), reader.line());
        const double y = csv::parse_double(fields[2], reader.file(), reader.line());
        if (!rows.emplace(id, Eigen::Vector2d(x, y)).second)
            throw LoadError(reader.file(), reader.line(), "duplicate region " + std::to_string(id));
    }
    std::set<std::size_t> ids;
    for (const auto& [id, c] : rows)
        ids.insert(id);
    expect_contiguous(ids, reader.file(), "region");
    std::vector<Eigen::Vector2d> centroids;
    for (const auto& [id, c] : rows)
        centroids.push_back(c);
    return d_min ? RegionGrid(std::move(centroids), *d_min) : RegionGrid(std::move(centroids));
}

} // namespace

Dataset load_dataset(const fs::path& crimes_path, const fs::path& features_path, const fs::path& regions_path,
                     std::size_t lag, std::optional<double> d_min) {
    Dataset ds;
    ds.grid = read_regions(regions_path, d_min);
    const std::size_t regions = ds.grid.regions();

    // crimes
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> counts;
    std::set<std::size_t> region_ids, slot_ids, type_ids;
    {
        csv::Reader reader(crimes_path);
        std::vector<std::string_view> fields;
        expect_header(reader, {"region_id", "time_slot", "crime_type", "count"}, false, fields);
        while (reader.next(fields)) {
            expect_width(reader, fields, 4);
            const auto n = csv::parse_id(fields[0], reader.file(), reader.line());
            const auto t = csv::parse_id(fields[1], reader.file(), reader.line());
            const auto k = csv::parse_id(fields[2], reader.file(), reader.line());
            const double c = csv::parse_double(fields[3], reader.file(), reader.line());
            if (n > regions)
                throw LoadError(reader.file(), reader.line(),
                                "region " + std::to_string(n) + " not in " + regions_path.string());
            if (!counts.emplace(std::make_tuple(n, t, k), c).second)
                throw LoadError(reader.file(), reader.line(), "duplicate cell");
            region_ids.insert(n);
            slot_ids.insert(t);
            type_ids.insert(k);
        }
        expect_contiguous(slot_ids, reader.file(), "time_slot");
        expect_contiguous(type_ids, reader.file(), "crime_type");
    }
    const std::size_t slots = *slot_ids.rbegin();
    const std::size_t types = *type_ids.rbegin();
    if (lag == 0)
        throw ConfigError("feature lag must be at least 1");
    if (lag >= slots)
        throw LoadError(crimes_path.string(), "lag " + std::to_string(lag) + " must be smaller than the " +
                                                   std::to_string(slots) + " time slots");

    ds.crimes = CrimeTensor(regions, slots, types);
    bool non_negative = true;
    for (const auto& [key, c] : counts) {
        const auto [n, t, k] = key;
        ds.crimes(n - 1, t - 1, k - 1) = c;
        non_negative = non_negative && c >= 0.0;
    }
    ds.crimes.set_counts(non_negative);
    ds.report.missing_crime_cells = regions * slots * types - counts.size();
    if (ds.report.missing_crime_cells > 0)
        ds.report.warnings.push_back(crimes_path.string() + ": " + std::to_string(ds.report.missing_crime_cells) +
                                     " missing cells filled with 0");

    // features: raw slot s lands in cell s + lag
    {
        csv::Reader reader(features_path);
        std::vector<std::string_view> fields;
        expect_header(reader, {"region_id", "time_slot"}, true, fields);
        const std::size_t width = fields.size();
        const std::size_t features = width - 2;
        ds.features = FeatureTensor(regions, slots + lag, features, lag);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        while (reader.next(fields)) {
            expect_width(reader, fields, width);
            const auto n = csv::parse_id(fields[0], reader.file(), reader.line());
            const auto s = csv::parse_id(fields[1], reader.file(), reader.line());
            if (n > regions)
                throw LoadError(reader.file(), reader.line(), "region " + std::to_string(n) + " out of range");
            if (s > slots)
                throw LoadError(reader.file(), reader.line(),
                                "time_slot " + std::to_string(s) + " beyond the last crime slot " +
                                    std::to_string(slots));
            if (!seen.emplace(n, s).second)
                throw LoadError(reader.file(), reader.line(), "duplicate row");
            auto cell = ds.features.at(n - 1, s - 1 + lag);
            for (std::size_t m = 0; m < features; ++m)
                cell(static_cast<Eigen::Index>(m)) = csv::parse_double(fields[2 + m], reader.file(), reader.line());
        }
        ds.report.missing_feature_rows = regions * slots - seen.size();
        ds.report.lag_padded_cells = regions * lag;
        if (ds.report.missing_feature_rows > 0)
            ds.report.warnings.push_back(features_path.string() + ": " +
                                         std::to_string(ds.report.missing_feature_rows) +
                                         " missing rows filled with 0");
    }
    return ds;
}

Dataset load_dataset_dir(const fs::path& dir, std::size_t lag, std::optional<double> d_min) {
    return load_dataset(dir / kCrimesFile, dir / kFeaturesFile, dir / kRegionsFile, lag, d_min);
}

void save_dataset(const fs::path& dir, const CrimeTensor& crimes, const FeatureTensor& features,
                  const RegionGrid& grid) {
    const std::size_t lag = features.lag();
    if (features.cells() != crimes.slots() + lag || features.regions() != crimes.regions() ||
        grid.regions() != crimes.regions())
        throw DimensionError("dataset tensors have inconsistent shapes");
    fs::create_directories(dir);
    {
        auto out = csv::open_output(dir / kCrimesFile);
        out << "region_id,time_slot,crime_type,count\n";
        for (std::size_t n = 0; n < crimes.regions(); ++n)
            for (std::size_t t = 0; t < crimes.slots(); ++t)
                for (std::size_t k = 0; k < crimes.types(); ++k)
                    out << n + 1 << ',' << t + 1 << ',' << k + 1 << ',' << csv::format_double(crimes(n, t, k))
                        << '\n';
    }
    {
        auto out = csv::open_output(dir / kFeaturesFile);
        out << "region_id,time_slot";
        for (std::size_t m = 0; m < features.features(); ++m)
            out << ",f" << m + 1;
        out << '\n';
        for (std::size_t n = 0; n < crimes.regions(); ++n)
            for (std::size_t s = 0; s < crimes.slots(); ++s) {
                out << n + 1 << ',' << s + 1;
                const auto cell = features.at(n, s + lag);
                for (std::size_t m = 0; m < features.features(); ++m)
                    out << ',' << csv::format_double(cell(static_cast<Eigen::Index>(m)));
                out << '\n';
            }
    }
    {
        auto out = csv::open_output(dir / kRegionsFile);
        out << "region_id,centroid_x_km,centroid_y_km\n";
        for (std::size_t n = 0; n < grid.regions(); ++n)
            out << n + 1 << ',' << csv::format_double(grid.centroid(n).x()) << ','
                << csv::format_double(grid.centroid(n).y()) << '\n';
    }
}

MatrixXd load_feature_slot(const fs::path& path, std::size_t regions, std::optional<std::size_t> slot) {
    csv::Reader reader(path);
    std::vector<std::string_view> fields;
    expect_header(reader, {"region_id", "time_slot"}, true, fields);
    const std::size_t width = fields.size();
    std::map<std::size_t, std::map<std::size_t, VectorXd>> by_slot;
    while (reader.next(fields)) {
        expect_width(reader, fields, width);
        const auto n = csv::parse_id(fields[0], reader.file(), reader.line());
        const auto s = csv::parse_id(fields[1], reader.file(), reader.line());
        if (n > regions)
            throw LoadError(reader.file(), reader.line(), "region " + std::to_string(n) + " out of range");
        VectorXd row(static_cast<Eigen::Index>(width - 2));
        for (std::size_t m = 0; m + 2 < width; ++m)
            row(static_cast<Eigen::Index>(m)) = csv::parse_double(fields[2 + m], reader.file(), reader.line());
        if (!by_slot[s].emplace(n, std::move(row)).second)
            throw LoadError(reader.file(), reader.line(), "duplicate row");
    }
    if (by_slot.empty())
        throw LoadError(reader.file(), "no feature rows");
    const std::map<std::size_t, VectorXd>* chosen = nullptr;
    if (slot && by_slot.count(*slot))
        chosen = &by_slot.at(*slot);
    else if (by_slot.size() == 1)
        chosen = &by_slot.begin()->second;
    else
        throw LoadError(reader.file(), slot ? "no rows for time_slot " + std::to_string(*slot)
                                            : std::string("file holds several time slots"));
    if (chosen->size() != regions)
        throw LoadError(reader.file(), "expected " + std::to_string(regions) + " regions, got " +
                                           std::to_string(chosen->size()));
    MatrixXd out(regions, width - 2);
    for (const auto& [n, row] : *chosen)
        out.row(static_cast<Eigen::Index>(n - 1)) = row.transpose();
    return out;
}

} // namespace ccc
