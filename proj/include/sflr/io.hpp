#ifndef SFLR_IO_HPP
#define SFLR_IO_HPP

#include "sflr/core.hpp"
#include "sflr/regression.hpp"
#include "sflr/spectral.hpp"

#include <filesystem>

namespace sflr {

// CSV with header t,x,y; t a positive integer, x in [0,1], y finite.
// Missing time indices give empty curves.
SparseFTS ingest_sparse_csv(const std::filesystem::path& path);

// CSV with header t,z; a blank z marks a missing response.
ScalarTS ingest_scalar_csv(const std::filesystem::path& path);

// CSV with header t,x,value; every time must provide a value at each grid
// node (long format, locations matched to the grid within 1e-9).
DenseFTS ingest_dense_csv(const std::filesystem::path& path, const SpatialGrid& grid);

// Round-trippable filter table with header k,x,b.
FilterSet ingest_filters_csv(const std::filesystem::path& path, const SpatialGrid& grid);

std::string format_double(double v);

void write_sparse_csv(const std::filesystem::path& path, const SparseFTS& data);
void write_scalar_csv(const std::filesystem::path& path, const ScalarTS& data);
void write_dense_csv(const std::filesystem::path& path, const DenseFTS& data,
                     const SpatialGrid& grid);
void write_spectral_csv(const std::filesystem::path& path, const SpectralDensityEstimate& est,
                        const SpatialGrid& grid, const FrequencyGrid& fgrid);
void write_cross_spectral_csv(const std::filesystem::path& path,
                              const CrossSpectralEstimate& est, const SpatialGrid& grid,
                              const FrequencyGrid& fgrid);
void write_filters_csv(const std::filesystem::path& path, const FilterSet& filters,
                       const SpatialGrid& grid);
void write_forecasts_csv(const std::filesystem::path& path, const std::vector<double>& zhat,
                         int s_first);

}  // namespace sflr

#endif
