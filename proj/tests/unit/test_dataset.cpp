#include "ccc/csv.hpp"
#include "ccc/datagen.hpp"
#include "ccc/dataset.hpp"
#include "ccc/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

namespace fs = std::filesystem;
using namespace ccc;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ccc_unit_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

void write_minimal(const fs::path& dir, const std::string& crimes, const std::string& features) {
    write(dir / "regions.csv", "region_id,centroid_x_km,centroid_y_km\n1,0,0\n");
    write(dir / "crimes.csv", crimes);
    write(dir / "features.csv", features);
}

} // namespace

TEST_CASE("format_double round-trips") {
    for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, std::numeric_limits<double>::max()})
        CHECK(std::stod(csv::format_double(v)) == v);
    CHECK(csv::format_double(2.0) == "2");
}

TEST_CASE("minimal dataset applies the feature lag") {
    TempDir tmp("minimal");
    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,2,1,5\n",
                  "region_id,time_slot,f1\n1,1,0.25\n1,2,0.75\n");
    const Dataset ds = load_dataset_dir(tmp.path, 1);
    CHECK(ds.crimes.regions() == 1);
    CHECK(ds.crimes.slots() == 2);
    CHECK(ds.crimes.types() == 1);
    CHECK(ds.features.features() == 1);
    CHECK(ds.features.cells() == 3);
    CHECK(ds.crimes(0, 1, 0) == 5.0);
    // cell 2 (1-based) holds raw slot 1, the future cell holds raw slot 2
    CHECK(ds.features.at(0, 1)(0) == 0.25);
    CHECK(ds.features.at(0, 2)(0) == 0.75);
    CHECK(ds.features.at(0, 0)(0) == 0.0);
    CHECK(ds.report.lag_padded_cells == 1);
}

TEST_CASE("missing crime cells are zero-filled and counted") {
    TempDir tmp("missing");
    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,1,2,1\n1,2,2,7\n",
                  "region_id,time_slot,f1\n1,1,1\n1,2,1\n");
    const Dataset ds = load_dataset_dir(tmp.path, 1);
    CHECK(ds.crimes(0, 1, 0) == 0.0);
    CHECK(ds.report.missing_crime_cells == 1);
    CHECK(ds.report.warnings.size() == 1);
}

TEST_CASE("loader errors name the file and line") {
    TempDir tmp("errors");
    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,2,1,5\n",
                  "region_id,time_slot,f1\n1,1,0.5\n1,2,abc\n");
    try {
        load_dataset_dir(tmp.path, 1);
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(e.line() == 3);
        CHECK(e.file().find("features.csv") != std::string::npos);
    }

    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,2,1,5\n",
                  "region_id,time_slot,f1\n1,1,0.5\n1,2,1\n");
    CHECK_THROWS_AS(load_dataset_dir(tmp.path, 2), LoadError);

    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,3,2\n",
                  "region_id,time_slot,f1\n1,1,0.5\n");
    CHECK_THROWS_AS(load_dataset_dir(tmp.path, 1), LoadError);

    write_minimal(tmp.path, "region_id,time_slot,crime_type,count\n1,1,1,4\n1,3,1,5\n",
                  "region_id,time_slot,f1\n1,1,0.5\n");
    // slot 2 never appears
    CHECK_THROWS_AS(load_dataset_dir(tmp.path, 1), LoadError);
}

TEST_CASE("save then load reproduces the tensors exactly") {
    TempDir tmp("roundtrip");
    SynthSpec spec;
    spec.grid_side = 2;
    spec.slots = 6;
    spec.types = 2;
    spec.features = 3;
    spec.lag = 2;
    spec.noise_sd = 0.3;
    spec.seed = 8;
    const SynthDataset d = generate(spec);
    save_dataset(tmp.path, d.crimes, d.features, d.grid);
    const Dataset back = load_dataset_dir(tmp.path, 2);
    CHECK(back.crimes.raw().size() == d.crimes.raw().size());
    CHECK(std::equal(back.crimes.raw().begin(), back.crimes.raw().end(), d.crimes.raw().begin()));
    CHECK(back.features == d.features);
    CHECK(back.grid.centroids() == d.grid.centroids());
}

TEST_CASE("feature slot files") {
    TempDir tmp("slot");
    write(tmp.path / "f.csv", "region_id,time_slot,f1,f2\n1,4,1,2\n2,4,3,4\n1,5,5,6\n2,5,7,8\n");
    const MatrixXd m = load_feature_slot(tmp.path / "f.csv", 2, 5);
    CHECK(m(1, 0) == 7.0);
    CHECK_THROWS_AS(load_feature_slot(tmp.path / "f.csv", 2, std::nullopt), LoadError);
    CHECK_THROWS_AS(load_feature_slot(tmp.path / "f.csv", 2, 9), LoadError);
    CHECK_THROWS_AS(load_feature_slot(tmp.path / "f.csv", 3, 4), LoadError);
}
