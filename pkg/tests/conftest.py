from stdegrade.parallel import limit_blas_threads

# small-matrix workloads: BLAS thread pools only add contention on few-core boxes
limit_blas_threads(1)
