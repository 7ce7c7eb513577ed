"""Leave-one-out cross validation for the LASSO at single-fit cost."""
