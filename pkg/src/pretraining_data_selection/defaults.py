# UOT selection settings used for all reported experiments.
epsilon = 1.0
tau1 = 1.0
tau2 = 100.0
epsilon_c = 0.01
uot_metric = "cosine"
greedy_ot_metric = "l2"
classes_to_select = 100

# Scaling iteration controls.
sinkhorn_tol = 1e-9
sinkhorn_max_iters = 10000

# Spherical k-means for unlabeled pre-training data.
cluster_count = 2000
kmeans_max_iters = 100
kmeans_n_init = 4
kmeans_min_cluster_size = 1

# SGD simulator.
divergence_threshold = 1e12
learning_rate_floor = 1e-6
pretrain_steps = 2000
init_radius = 10.0
m_tilde = 256
pl_tolerance = 1e-10

metrics = ["cosine", "l2"]
selection_methods = ["random", "label", "greedy_ot", "uot"]
init_modes = ["random", "pretrained"]
feature_formats = ["binary", "csv"]

feature_file_magic = b"FSEL"
centroid_file_magic = b"CSEL"
file_format_version = 1

# Largest cosine cost (1 - cos) before division by epsilon_c.
max_cosine_distance = 2.0

float_format = "%.17g"


def max_cosine_cost(scale):
    return max_cosine_distance / scale

