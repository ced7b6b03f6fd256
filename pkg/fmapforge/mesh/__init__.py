"""Triangle meshes: file readers, cotangent Laplacian, graph geodesics."""
