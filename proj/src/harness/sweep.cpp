#include <filesystem>
#include <fstream>

#include "tablab/harness.hpp"

namespace tablab::harness {

SweepResult sweep(const SweepGrid& grid) {
    if (grid.cells() == 0) throw ConfigError("sweep: empty grid");
    SweepResult res;

    // grid order: kind, size, position, epsilon (epsilon fastest)
    for (const auto kind : grid.kinds) {
        for (const auto size : grid.trigger_sizes) {
            for (const auto pos : grid.positions) {
                for (const auto eps : grid.epsilons) {
                    ExperimentConfig cell = grid.base;
                    cell.trigger.kind = kind;
                    cell.trigger.size = size;
                    cell.trigger.rank_offset = pos;
                    cell.poison.epsilon = eps;
                    cell.out_dir = grid.base.out_dir + "/cell" +
                                   std::to_string(res.cell_configs.size());
                    res.cell_configs.push_back(cell);
                }
            }
        }
    }

    for (const auto& cell : res.cell_configs) {
        try {
            res.cell_results.push_back(run_experiment(cell));
            res.cell_errors.emplace_back();
        } catch (const std::exception& e) {
            res.cell_results.emplace_back();  // placeholder keeps grid-order alignment
            res.cell_errors.emplace_back(e.what());
        }
    }

    std::filesystem::create_directories(grid.base.out_dir);
    std::ofstream csv(grid.base.out_dir + "/sweep.csv");
    if (!csv) throw StageError("cannot write sweep csv");
    csv << sweep_csv(res);
    emit_plots(res, grid.base.out_dir + "/sweep.svg");
    return res;
}

}  // namespace tablab::harness
