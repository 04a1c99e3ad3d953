# NullPlan core: co-array geometry, nulling weights, HetNet rate model,
# nulling optimizer and the Monte Carlo harness
