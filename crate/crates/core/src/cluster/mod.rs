//! Risk-pattern discovery: kernel PCA + k-means, spectral clustering,
//! information criteria, silhouettes and semantic naming of clusters.

pub mod criteria;
pub mod kmeans;
pub mod kpca;
pub mod model;
pub mod risk;
pub mod spectral;

pub use criteria::{adjusted_rand_index, aic, bic, silhouette, wcss, Silhouette};
pub use kmeans::{kmeans, kmeans_runs, KMeansModel, KMeansRun};
pub use kpca::{kpca_fit, KpcaModel, RetainedDims};
pub use model::{
    argmin_bic, cluster_profiles, compare_methods, prepare, select_k, subsample_indices, variant_matrix,
    ClusterFit, ClusterMethod, ClusterModel, ClusterSettings, Comparison, CriterionRow, Prepared, Selection,
};
pub use risk::{assign_semantic_labels, ClusterProfile, RiskLabel};
pub use spectral::{knn_graph, laplacian, median_edge_length, spectral_cluster, KnnGraph, LaplacianKind, SpectralParams, SpectralResult};
