#pragma once

// RVE files and synthetic microstructure generators.
//
// File format (text): a first line "n1 n2 l1 l2" followed by n1 * n2
// integer phase labels in row-major order (second index fastest),
// separated by whitespace. Lines starting with '#' are comments.

#include "crom/app/config.hpp"
#include "crom/spectral.hpp"

#include <filesystem>

namespace crom::app {

VoxelGrid read_rve(const std::filesystem::path& path);
void write_rve(const std::filesystem::path& path, const VoxelGrid& grid);

/// Two equal discs on the x axis (first grid axis), centred on the domain,
/// with a surface gap of gap_fraction * n1 voxels between them.
VoxelGrid generate_two_particle(const GeneratorSpec& spec);

/// Non-overlapping equal discs placed by random sequential adsorption
/// until the voxel volume fraction is within 0.02 of the target.
VoxelGrid generate_multi_particle(const GeneratorSpec& spec);

VoxelGrid generate_rve(const GeneratorSpec& spec);

/// Grid described by a run configuration (file or generator).
VoxelGrid load_rve(const RveSource& source, const std::filesystem::path& base_dir = {});

/// Fraction of voxels carrying `phase`.
double phase_fraction(const VoxelGrid& grid, int phase);

}  // namespace crom::app
