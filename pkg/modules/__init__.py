"""
Pose Task Success: predição de sucesso de tarefas dependentes de pose sob incerteza.

Módulos: se3_core, error_grid, task_evaluators, acceptable_space,
pose_distribution, decision, harness, report_generator, config, cli.
"""
