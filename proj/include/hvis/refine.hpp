#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hvis/generator.hpp"
#include "hvis/motion.hpp"
#include "hvis/optim.hpp"

namespace hvis::dln {

// Ranked per-joint validation errors and the hard-joint selection. A
// default-constructed map (m = 0, nothing selected) means refinement is
// disabled and fusion passes the base prediction through.
struct DeliberateMap {
    std::vector<double> per_joint_error;  // millimeters
    std::vector<int> ranking;             // joint indices, worst first
    std::vector<int> selected;            // first m of ranking
    int m = 0;

    std::string to_text() const;
    static DeliberateMap from_text(const std::string& text);
};

// Sorts joints by error, descending, ties broken by ascending index, and
// selects the worst m. m must be in [1, joint count].
DeliberateMap rank_joints(const std::vector<double>& per_joint_error, int m);

// Mean Euclidean error (mm) per joint of `predict` over the given windows.
// predict maps a window to a [3N x F] prediction aligned like the window.
std::vector<double> per_joint_errors(const std::function<ad::TensorPtr(const data::WindowPair&)>& predict,
                                     const std::vector<data::WindowPair>& windows, int n_joints);

// Dedicated causal refiner for the selected joints: three residual blocks of
// four dilated convolutions each, then one linear head per selected joint
// turning the last-step features into F offset frames added onto that
// joint's last observed position.
struct RefineNet {
    int n_selected = 0;
    int o_frames = 0;
    int f_frames = 0;
    int channels = 64;
    double dropout_rate = 0.2;
    std::vector<gen::TcnBlock> blocks;
    std::vector<ad::TensorPtr> head_w;  // [3F x channels] per selected joint
    std::vector<ad::TensorPtr> head_b;  // [3F]

    static RefineNet create(int n_selected, int o_frames, int f_frames, int channels, ad::Rng& rng);

    void register_params(ad::ParamSet& params, const std::string& prefix) const;

    // One window: observed selected-joint rows [3m x O] -> [3m x F].
    ad::TensorPtr forward(const ad::TensorPtr& obs_selected, bool train, ad::Rng& rng) const;

    // B windows side by side: x [3m x O*B], last positions [3m x B] ->
    // per-joint stacked predictions [3mF x B], row i*3F + c*F + t.
    ad::TensorPtr forward_batch(const ad::TensorPtr& x, const ad::TensorPtr& last_pos, bool train,
                                ad::Rng& rng) const;
};

// Observed / future rows of the selected joints, [3m x O] and [3m x F].
ad::TensorPtr selected_obs_matrix(const data::WindowPair& w, const DeliberateMap& map);
ad::TensorPtr selected_future_matrix(const data::WindowPair& w, const DeliberateMap& map);

// Replaces the selected joints' rows of the base prediction with the
// refiner's rows. Value-level: predictions only, no gradient routing.
ad::TensorPtr fuse_predictions(const ad::TensorPtr& sln_pred, const ad::TensorPtr& dtc_pred,
                               const DeliberateMap& map);

struct DlnTrainStats {
    std::vector<double> epoch_loss;
};

// Supervised training of the refiner on the selected joints' true futures:
// squared trajectory error averaged over frames, joints and windows. The
// base predictor is not involved. Throws TrainingError past the divergence
// guard.
DlnTrainStats dln_train(RefineNet& net, const std::vector<data::WindowPair>& windows, const DeliberateMap& map,
                        int epochs, int batch_size, double lr, ad::Rng& rng, double divergence_guard = 1e6);

}  // namespace hvis::dln
