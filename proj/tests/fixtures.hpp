#pragma once

// Shared test fixtures. The planted dataset has four groups of ten colonias:
// groups A and B share the service profile of groups C and D respectively,
// but A/B have public water service while C/D do not. Within each subset the
// two groups differ on every categorical attribute and sit in disjoint
// population bands, so clustering should recover exactly two clusters per
// subset and the only attribute separating {A,C} from {B,D} across the union
// is Public Water Service itself (every other attribute ties with it).
//
// The service ratios carry small per-record jitter: message passing cannot
// break ties between exchangeable points, so the within-group geometry must
// be irregular for the exemplar choice to settle. Groups A/C (and B/D) reuse
// the same jitter sequence, keeping their attribute multisets identical.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "aquaclust/csv.hpp"
#include "aquaclust/dataset.hpp"

namespace fixtures {

struct PlantedRow {
    std::string id;
    std::string state;
    char group;  // 'A'..'D'
    double population;
    bool served;      // pattern: full municipal service
    bool has_coords;
    double lat = 0.0;
    double lon = 0.0;
};

struct Planted {
    std::string csv_text;
    std::vector<PlantedRow> rows;   // kept rows, in file order
    std::size_t group_size = 10;
};

// noise=true appends three malformed rows: a blank categorical value
// (dropped at load), a zero population and an impossible count (both
// dropped during normalization).
inline Planted make_planted(bool noise = false, bool coords = true) {
    Planted out;
    std::ostringstream csv;
    csv << "id,Name,State,County,Latitude,Longitude,Estimated Population,"
           "Water Source,Water Hauled,Private Wells,Public Water Service,"
           "Service Adequacy,People without Water,Water Health Hazard,"
           "People with Water,Served by Public Sewer,People without Wastewater,"
           "People with Wastewater\n";
    const char* states[4] = {"TX", "NM", "AZ", "CA"};
    static constexpr double water_jitter[10] = {0.000, 0.007, -0.009, 0.013, -0.004,
                                                0.018, -0.014, 0.003, -0.019, 0.010};
    static constexpr double waste_jitter[10] = {-0.011, 0.005, 0.016, -0.007, 0.002,
                                                -0.017, 0.009, -0.002, 0.012, -0.013};
    int row_no = 0;
    auto emit = [&](char group, double pop) {
        bool served = group == 'A' || group == 'C';
        double water_ratio = (served ? 0.9 : 0.1) + water_jitter[row_no % 10];
        double waste_ratio = (served ? 0.9 : 0.1) + waste_jitter[row_no % 10];
        // Counts rounded to survey-plausible precision.
        double with_water = std::round(water_ratio * pop * 100.0) / 100.0;
        double with_waste = std::round(waste_ratio * pop * 100.0) / 100.0;
        PlantedRow r;
        r.id = std::string(1, group) + std::to_string(row_no % 10 + 1);
        r.state = states[row_no % 4];
        r.group = group;
        r.population = pop;
        r.served = served;
        r.has_coords = coords;
        r.lat = 26.0 + 0.01 * row_no;
        r.lon = -97.0 - 0.01 * row_no;
        csv << r.id << ",Colonia " << r.id << ',' << r.state << ",County"
            << (row_no % 5 + 1) << ',';
        if (coords)
            csv << aquaclust::csv::format_double(r.lat) << ','
                << aquaclust::csv::format_double(r.lon) << ',';
        else
            csv << ",,";
        csv << aquaclust::csv::format_double(pop) << ','
            << (served ? "Municipal" : "Well") << ','      // Water Source
            << (served ? 'N' : 'Y') << ','                 // Water Hauled
            << (served ? 'N' : 'Y') << ','                 // Private Wells
            << (group <= 'B' ? 'Y' : 'N') << ','           // Public Water Service
            << (served ? 'Y' : 'N') << ','                 // Service Adequacy
            << aquaclust::csv::format_double(std::round((pop - with_water) * 100.0) / 100.0)
            << ',' << (served ? 'N' : 'Y') << ','          // Water Health Hazard
            << aquaclust::csv::format_double(with_water) << ','
            << (served ? 'Y' : 'N') << ','                 // Served by Public Sewer
            << aquaclust::csv::format_double(std::round((pop - with_waste) * 100.0) / 100.0)
            << ',' << aquaclust::csv::format_double(with_waste) << '\n';
        out.rows.push_back(r);
        ++row_no;
    };
    for (int i = 0; i < 10; ++i) emit('A', 200.0 + 10.0 * i);
    for (int i = 0; i < 10; ++i) emit('B', 800.0 + 10.0 * i);
    for (int i = 0; i < 10; ++i) emit('C', 200.0 + 10.0 * i);
    for (int i = 0; i < 10; ++i) emit('D', 800.0 + 10.0 * i);
    if (noise) {
        csv << "X1,Colonia X1,TX,County9,,,"
               "150,,N,N,Y,Y,15,N,135,Y,15,135\n";          // blank Water Source
        csv << "X2,Colonia X2,TX,County9,,,"
               "0,Municipal,N,N,Y,Y,0,N,0,Y,0,0\n";          // zero population
        csv << "X3,Colonia X3,TX,County9,,,"
               "100,Municipal,N,N,Y,Y,10,N,150,Y,10,90\n";   // count above population
    }
    out.csv_text = csv.str();
    return out;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("aquaclust_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const {
        return path / name;
    }
};

inline std::filesystem::path data_dir() {
#ifdef AQUACLUST_DATA_DIR
    return std::filesystem::path(AQUACLUST_DATA_DIR);
#else
    return std::filesystem::path("data");
#endif
}

}  // namespace fixtures
