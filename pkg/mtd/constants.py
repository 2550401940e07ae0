"""
constants.py

Defaults of the MTD framework and the numeric guards used throughout.
- training defaults (SGD settings, epochs)
- loss weights and mask rate
- graph and architecture defaults
- numeric guards (clamps, epsilons)

Guards only engage outside the normal operating range, where gradients
stay exact.
"""

# -----------------------
# Optimiser / schedule
# -----------------------
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_MOMENTUM = 0.9
DEFAULT_BATCH_SIZE = 128
DEFAULT_EPOCHS = 100
DEFAULT_WEIGHT_DECAY = 0.0

# -----------------------
# Loss weights (L_all = L_mc + alpha*L_gc + beta*L_ccc + gamma*L_re)
# -----------------------
DEFAULT_ALPHA = 0.4
DEFAULT_BETA = 0.4
DEFAULT_GAMMA = 0.1

# -----------------------
# Fragment masking
# -----------------------
DEFAULT_MASK_RATE = 0.25

# -----------------------
# Label-guided graph
# -----------------------
DEFAULT_ETA = 100.0

# -----------------------
# Architecture
# -----------------------
DEFAULT_EMBED_DIM = 512
DEFAULT_HIDDEN = (512, 512)
DEFAULT_HIDDEN_ACTIVATION = "relu"
CLASSIFIER_INPUTS = ("gated", "concat")

# -----------------------
# Incomplete-data protocol
# -----------------------
DEFAULT_VIEW_MISSING_RATE = 0.5
DEFAULT_LABEL_MISSING_RATE = 0.5
DEFAULT_TRAIN_RATIO = 0.7

# -----------------------
# Numeric guards
# -----------------------
SIGMOID_CLAMP = 500.0
NORMALIZE_EPS = 1e-12
CONTRASTIVE_EPS = 1e-8
LOG_FLOOR = 1e-12
HAMMING_THRESHOLD = 0.5

# -----------------------
# Report column order (AP, 1-HL, 1-RL, AUC, 1-OE, 1-Cov)
# -----------------------
METRIC_COLUMNS = ["ap", "one_minus_hl", "one_minus_rl", "auc", "one_minus_oe", "one_minus_cov"]
METRIC_LABELS = ["AP", "1-HL", "1-RL", "AUC", "1-OE", "1-Cov"]
LOSS_COLUMNS = ["l_mc", "l_gc", "l_ccc", "l_re", "l_total"]
