#include <doctest.h>

#include <algorithm>

#include "distr/planner.hpp"

using namespace distr;

TEST_CASE("io_cost direct evaluation") {
  CHECK(io_cost(128, 1024, 64) == 8u * (16384u + 131072u));
  CHECK(io_cost(128, 1024, 64) == 1'179'648u);
  for (std::uint64_t n : {16u, 64u, 256u}) CHECK(io_cost(n, n, 32) == 4 * n * 32);
  // ceil(100 / 32) = 4 blocks
  CHECK(io_cost(32, 100, 8) == 4u * (2u * 32u * 8u + 2u * 100u * 8u));
  CHECK_THROWS_AS(io_cost(0, 64, 64), PreconditionError);
}

TEST_CASE("io_cost is strictly decreasing in l over the candidate grid") {
  const auto tiles = HardwareDescriptor{}.candidate_tiles;
  for (std::uint64_t d : {32u, 64u, 128u}) {
    for (std::size_t i = 0; i + 1 < tiles.size(); ++i) {
      CHECK(io_cost(tiles[i], 1024, d) > io_cost(tiles[i + 1], 1024, d));
    }
  }
}

TEST_CASE("occupancy arithmetic") {
  const HardwareDescriptor hw;
  const auto a = occupancy(128, 128, 64, hw);
  CHECK(a.block_bytes == 49152);
  CHECK(a.blocks_per_sm == 2);
  CHECK(a.warps_per_sm == 8);
  CHECK(a.meets_warp_target);
  CHECK(a.fits_shared_memory);

  const auto b = occupancy(128, 64, 128, hw);
  CHECK(b.block_bytes == 65536);
  CHECK(b.blocks_per_sm == 1);
  CHECK(b.warps_per_sm == 4);
  CHECK_FALSE(b.feasible);

  HardwareDescriptor tiny = hw;
  tiny.shared_mem_bytes = 1024;
  const auto c = occupancy(16, 16, 64, tiny);
  CHECK(c.blocks_per_sm == 0);
  CHECK_FALSE(c.fits_shared_memory);
  CHECK_FALSE(c.feasible);
}

TEST_CASE("select_block_sizes under the default descriptor") {
  const HardwareDescriptor hw;
  CHECK(select_block_sizes(128, hw) == BlockSpec{128, 32});
  CHECK(select_block_sizes(32, hw) == BlockSpec{256, 64});
  CHECK(select_block_sizes(64, hw) == BlockSpec{256, 64});
}

TEST_CASE("selection is the lexicographic maximum of the feasible set") {
  HardwareDescriptor hw;
  for (std::uint64_t ms : {32768u, 65536u, 102400u, 196608u}) {
    hw.shared_mem_bytes = ms;
    for (std::uint64_t d : {16u, 32u, 64u, 128u, 256u}) {
      const auto sel = try_select_block_sizes(d, hw);
      std::optional<BlockSpec> oracle;
      for (const auto& row : feasibility_table(d, 1024, hw)) {
        if (row.occ.feasible && (!oracle || row.l > oracle->l ||
                                 (row.l == oracle->l && row.m > oracle->m))) {
          oracle = BlockSpec{row.l, row.m};
        }
      }
      CHECK(sel == oracle);
      if (sel) {
        CHECK(sel->l % hw.tile_unit == 0);
        CHECK(sel->m % hw.tile_unit == 0);
        CHECK(occupancy(sel->l, sel->m, d, hw).warps_per_sm >= 2 * hw.tensor_cores);
      }
    }
  }
}

TEST_CASE("selected l is monotone in M_s") {
  HardwareDescriptor hw;
  for (std::uint64_t d : {32u, 64u, 128u}) {
    std::uint32_t prev = 0;
    for (std::uint64_t ms = 4096; ms <= 262144; ms += 4096) {
      hw.shared_mem_bytes = ms;
      const auto sel = try_select_block_sizes(d, hw);
      const std::uint32_t l = sel ? sel->l : 0;
      CHECK(l >= prev);
      prev = l;
    }
  }
}

TEST_CASE("infeasibility names the binding constraint") {
  auto constraint_of = [](const HardwareDescriptor& hw) {
    try {
      select_block_sizes(64, hw);
    } catch (const InfeasibleError& e) {
      return e.constraint();
    }
    return std::string("none");
  };
  HardwareDescriptor hw;
  hw.shared_mem_bytes = 1000;
  CHECK(constraint_of(hw) == "shared_memory");
  hw = {};
  hw.tensor_cores = 1000;
  CHECK(constraint_of(hw) == "occupancy");
  hw = {};
  hw.score_budget = 100;
  CHECK(constraint_of(hw) == "score_budget");

  hw = {};
  hw.shared_mem_bytes = 0;
  CHECK_THROWS_AS(select_block_sizes(64, hw), PreconditionError);
  hw = {};
  hw.candidate_tiles = {16, 24};
  CHECK_THROWS_AS(hw.validate(), PreconditionError);
}

TEST_CASE("descriptor JSON") {
  const auto hw = parse_descriptor(R"({"M_s": 65536, "N_T": 2, "W_b": 8, "w": 4, "N'": 32,
                                       "candidate_tiles": [32, 64], "score_budget": 4096})");
  CHECK(hw.shared_mem_bytes == 65536);
  CHECK(hw.tensor_cores == 2);
  CHECK(hw.warps_per_block == 8);
  CHECK(hw.element_bytes == 4);
  CHECK(hw.tile_unit == 32);
  CHECK(hw.candidate_tiles == std::vector<std::uint32_t>{32, 64});
  CHECK(hw.score_budget == 4096);
  CHECK(parse_descriptor(descriptor_to_json(hw)) == hw);

  CHECK(parse_descriptor("{}") == HardwareDescriptor{});
  CHECK(parse_descriptor(R"({"N'": 32})").candidate_tiles ==
        std::vector<std::uint32_t>{32, 64, 128, 256});
  CHECK_THROWS_AS(parse_descriptor("[1, 2]"), PreconditionError);
  CHECK_THROWS_AS(parse_descriptor("{\"M_s\": \"big\"}"), PreconditionError);
  CHECK_THROWS_AS(parse_descriptor("{\"M_s\": 0}"), PreconditionError);
  CHECK_THROWS_AS(parse_descriptor("not json"), PreconditionError);
}

TEST_CASE("feasibility CSV lists every candidate pair") {
  const HardwareDescriptor hw;
  const auto rows = feasibility_table(64, 1024, hw);
  CHECK(rows.size() == 25);
  const auto csv = feasibility_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
  CHECK(csv.find("128,128,") != std::string::npos);
}

TEST_CASE("calibration against the published selections") {
  const auto grid = CalibrationGrid::defaults();
  const auto report = calibrate(reference_targets(), grid);
  CHECK(report.descriptors_searched == grid.size());
  CHECK(report.matches >= 2);
  CHECK(report.matches < 3);
  CHECK(report.per_target.size() == 3);
  // Default descriptor is in the grid and reaches the maximum, so it wins.
  CHECK(report.best == HardwareDescriptor{});
  for (const auto& t : report.per_target) {
    if (t.target.d == 64) CHECK_FALSE(t.matched);
  }
}

TEST_CASE("calibration edge cases") {
  const auto grid = CalibrationGrid::defaults();
  const auto own = select_block_sizes(64, HardwareDescriptor{});
  const auto single = calibrate({{64, own}}, grid);
  CHECK(single.matches == 1);

  const auto clash = calibrate({{64, {128, 128}}, {64, {256, 64}}}, grid);
  CHECK(clash.matches < 2);

  CHECK_THROWS_AS(calibrate({}, grid), PreconditionError);
  CHECK_THROWS_AS(calibrate({{64, own}}, CalibrationGrid{}), PreconditionError);
}

TEST_CASE("shipped descriptor file equals the built-in defaults") {
  CHECK(load_descriptor(DISTRATTN_DEFAULT_HW) == HardwareDescriptor{});
  CHECK_THROWS_AS(load_descriptor("/nonexistent/hw.json"), IoError);
}
