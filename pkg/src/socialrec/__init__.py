"""socialrec: social-graph refinement recommender.

Library layout:

* data            datasets, labeling, splits, synthetic generator
* analysis        relation-quality measurements over the social graph
* encoder         feature projection and bipartite propagation
* clusters        item interest clusters and anchor users
* gsl             learned social-graph edits (deletion, addition, fusion)
* mimic           pseudo-inactive embeddings and the cluster-matching loss
* training        joint objective, Adam, checkpointing
* evaluation      top-K ranking metrics with sampled negatives
* cli             batch subcommands tying the pipeline together
"""

__version__ = "0.1.0"
